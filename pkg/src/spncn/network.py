"""Spiking neural coding network.

Layer 0 is the sensory layer: the concatenation of an x-block (the
stimulus) and an optional y-block (a rate-coded one-hot label).  Layers
1..L are spiking.  Every tick, layer l predicts the trace of layer l-1 from
its own spikes,

    z_mu[l-1] = W[l] @ s[l],      e[l-1] = z_mu[l-1] - z[l-1],

and the error neurons feed back into the currents through the error
synapses E[l].  Learning is a spike-triggered outer product of the local
error with the layer's spikes, so spike-free ticks change nothing.

Arrays for spiking layers are stored in lists indexed 1..L (index 0 is
unused for J and the neuron state) so the code reads like the math.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import encode
from .encode import EncoderConfig
from .exceptions import NumericInputError, ShapeError
from .neuron import LIF, LifConfig, SpikeResponseModel, TraceConfig, trace_update


def identity(v):
    return v


@dataclass(frozen=True)
class SpncnConfig:
    layer_sizes: tuple[int, ...]
    label_size: int = 0
    kappa: float = 0.9
    gamma_J: float = 0.0
    beta: float = 0.9
    alpha_u: float = 0.0025
    lam: float = 0.0
    w_bound: float = 20.0
    reuse_error_delta: bool = True
    init_scale: float = 0.05
    mirror_init: bool = False
    w_max: float = 1.0
    w_min: float = -1.0
    phi: Callable = identity

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(n <= 0 for n in sizes):
            raise ValueError(f"need a sensory size and at least one layer, all > 0; got {sizes}")
        if not 0 <= self.label_size < sizes[0]:
            raise ValueError("label block must be smaller than the sensory layer")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.w_bound > 0:
            raise ValueError("w_bound must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")

    @property
    def L(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def x_size(self) -> int:
        return self.layer_sizes[0] - self.label_size


@dataclass
class SpncnParams:
    W: list  # W[l]: n_{l-1} x n_l, l = 1..L (W[0] is None)
    E: list  # E[l]: n_l x n_{l-1}
    # running squared column norms of E, kept by the sparse learning path
    _E_colsq: list | None = field(default=None, repr=False, compare=False)

    @property
    def L(self) -> int:
        return len(self.W) - 1

    def matrices(self) -> dict[str, np.ndarray]:
        out = {}
        for l in range(1, self.L + 1):
            out[f"W{l}"] = self.W[l]
            out[f"E{l}"] = self.E[l]
        return out

    def copy(self) -> "SpncnParams":
        return SpncnParams([None] + [w.copy() for w in self.W[1:]],
                           [None] + [e.copy() for e in self.E[1:]])


@dataclass
class SpncnState:
    J: list
    neuron: list
    s: list
    z: list
    z_mu: list
    e: list
    zmu0_sum: np.ndarray
    z0_sum: np.ndarray
    spike_sum: list
    n_ticks: int = 0
    update_events: list = None

    @property
    def L(self) -> int:
        return len(self.J) - 1


@dataclass
class Deltas:
    dW: list
    dE: list


@dataclass(frozen=True)
class SensoryInput:
    x_spikes: np.ndarray
    y_spikes: np.ndarray | None = None
    labeled: bool = True
    clamp_errors: bool = False


def project_columns(M: np.ndarray, bound: float) -> np.ndarray:
    """Rescale, in place, every column of ``M`` whose norm exceeds ``bound``."""
    norms = np.sqrt(np.einsum("ij,ij->j", M, M))
    over = norms > bound
    if np.any(over):
        M[:, over] *= bound / norms[over]
    return M


def _zero_state(cfg: SpncnConfig, srm: SpikeResponseModel) -> SpncnState:
    n = cfg.layer_sizes
    L = cfg.L
    return SpncnState(
        J=[np.zeros(0)] + [np.zeros(n[l]) for l in range(1, L + 1)],
        neuron=[None] + [srm.init_state(n[l]) for l in range(1, L + 1)],
        s=[np.zeros(n[l]) for l in range(L + 1)],
        z=[np.zeros(n[l]) for l in range(L + 1)],
        z_mu=[np.zeros(n[l]) for l in range(L)],
        e=[np.zeros(n[l]) for l in range(L)],
        zmu0_sum=np.zeros(n[0]),
        z0_sum=np.zeros(n[0]),
        spike_sum=[np.zeros(n[l]) for l in range(L + 1)],
        n_ticks=0,
        update_events=[0] * (L + 1),
    )


def build(cfg: SpncnConfig, seed, srm: SpikeResponseModel | None = None) -> tuple[SpncnParams, SpncnState]:
    """Gaussian-initialised parameters and an all-zero state."""
    srm = srm or LIF(LifConfig())
    rng = np.random.default_rng(seed)
    n = cfg.layer_sizes
    W, E = [None], [None]
    for l in range(1, cfg.L + 1):
        w = rng.normal(0.0, cfg.init_scale, size=(n[l - 1], n[l])) if cfg.init_scale > 0 else np.zeros((n[l - 1], n[l]))
        if cfg.mirror_init:
            e = -w.T.copy()
        elif cfg.init_scale > 0:
            e = rng.normal(0.0, cfg.init_scale, size=(n[l], n[l - 1]))
        else:
            e = np.zeros((n[l], n[l - 1]))
        W.append(project_columns(w, cfg.w_bound))
        E.append(project_columns(e, cfg.w_bound))
    return SpncnParams(W, E), _zero_state(cfg, srm)


def reset_state(state: SpncnState, srm: SpikeResponseModel | None = None) -> SpncnState:
    """Zero every dynamic quantity.  Parameters are not touched."""
    for l in range(1, state.L + 1):
        state.J[l][:] = 0.0
        if srm is not None:
            state.neuron[l] = srm.init_state(state.J[l].shape[0])
        else:
            state.neuron[l].v[:] = 0.0
            state.neuron[l].refrac[:] = 0
    for arr in (*state.s, *state.z, *state.z_mu, *state.e, *state.spike_sum):
        arr[:] = 0.0
    begin_window(state)
    state.update_events = [0] * (state.L + 1)
    return state


def begin_window(state: SpncnState) -> None:
    state.zmu0_sum[:] = 0.0
    state.z0_sum[:] = 0.0
    for a in state.spike_sum:
        a[:] = 0.0
    state.n_ticks = 0


def compute_currents(state: SpncnState, params: SpncnParams, cfg: SpncnConfig) -> SpncnState:
    """Leaky interpolation of each layer's current toward its error drive."""
    k, g, phi = cfg.kappa, cfg.gamma_J, cfg.phi
    L = state.L
    for l in range(1, L + 1):
        E = params.E[l]
        if E.shape[1] != state.e[l - 1].shape[0]:
            raise ShapeError(f"E{l} has {E.shape[1]} columns, e[{l - 1}] has {state.e[l - 1].shape[0]} entries")
        drive = E @ state.e[l - 1]
        if l < L:
            drive = drive - state.e[l]
        J = state.J[l]
        state.J[l] = (1.0 - k) * J + k * (-g * J + phi(drive))
    return state


def step_states(state: SpncnState, params: SpncnParams, inp: SensoryInput, cfg: SpncnConfig,
                srm: SpikeResponseModel, trace_cfg: TraceConfig) -> SpncnState:
    """Advance the whole network by one tick (currents, spikes, traces, predictions)."""
    nx, ny = cfg.x_size, cfg.label_size
    if np.shape(inp.x_spikes) != (nx,):
        raise ShapeError(f"x spikes have shape {np.shape(inp.x_spikes)}, expected ({nx},)")
    L = state.L

    compute_currents(state, params, cfg)
    for l in range(1, L + 1):
        state.neuron[l], state.s[l] = srm.step(state.neuron[l], state.J[l])
        state.z[l] = trace_update(state.z[l], state.s[l], trace_cfg)

    s0 = np.zeros(nx + ny)
    s0[:nx] = inp.x_spikes
    if ny and inp.labeled and inp.y_spikes is not None:
        if np.shape(inp.y_spikes) != (ny,):
            raise ShapeError(f"y spikes have shape {np.shape(inp.y_spikes)}, expected ({ny},)")
        s0[nx:] = inp.y_spikes
    state.s[0] = s0
    state.z[0] = trace_update(state.z[0], s0, trace_cfg)

    for l in range(L, 0, -1):
        state.z_mu[l - 1] = _predict(params.W[l], state.s[l])
        state.e[l - 1] = state.z_mu[l - 1] - state.z[l - 1]

    if inp.clamp_errors:
        state.e[0][:] = 0.0
    elif ny and not inp.labeled:
        state.e[0][nx:] = 0.0

    state.zmu0_sum += state.z_mu[0]
    state.z0_sum += state.z[0]
    for l in range(L + 1):
        state.spike_sum[l] += state.s[l]
    state.n_ticks += 1
    return state


def _predict(W: np.ndarray, s: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(s)
    if idx.size * 8 < s.size and np.all(s[idx] == 1.0):
        # binary and sparse: summing the spiking columns is cheaper than a matvec
        return W[:, idx].sum(axis=1) if idx.size else np.zeros(W.shape[0])
    return W @ s


def compute_updates(state: SpncnState, cfg: SpncnConfig) -> Deltas:
    """Spike-triggered local updates: dW = e[l-1] s[l]^T, dE = -beta s[l] e[l-1]^T."""
    dW, dE = [None], [None]
    for l in range(1, state.L + 1):
        e, s = state.e[l - 1], state.s[l]
        dw = np.outer(e, s)
        dW.append(dw)
        dE.append(-cfg.beta * dw.T if cfg.reuse_error_delta else -cfg.beta * np.outer(s, e))
    return Deltas(dW, dE)


def stdp_hybrid_updates(state: SpncnState, params: SpncnParams, cfg: SpncnConfig) -> Deltas:
    """Convex blend of the error-driven update with a soft-bounded STDP term."""
    lam = cfg.lam
    base = compute_updates(state, cfg)
    if lam == 0.0:
        return base
    dW = [None]
    for l in range(1, state.L + 1):
        W = params.W[l]
        a_plus = cfg.w_max - W
        a_minus = W - cfg.w_min
        stdp = a_plus * np.outer(state.s[l - 1], state.z[l]) + a_minus * np.outer(state.z[l - 1], state.s[l])
        dW.append((1.0 - lam) * base.dW[l] - lam * stdp)
    return Deltas(dW, base.dE)


def apply_updates(params: SpncnParams, deltas: Deltas, cfg: SpncnConfig) -> SpncnParams:
    """Take one step ``-alpha_u * delta`` and bound every column norm by ``w_bound``."""
    for l in range(1, params.L + 1):
        dw, de = deltas.dW[l], deltas.dE[l]
        if dw.shape != params.W[l].shape or de.shape != params.E[l].shape:
            raise ShapeError(f"delta shapes for layer {l} do not match parameters")
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(de))):
            raise NumericInputError(f"non-finite update for layer {l}")
        params.W[l] -= cfg.alpha_u * dw
        params.E[l] -= cfg.alpha_u * de
        project_columns(params.W[l], cfg.w_bound)
        project_columns(params.E[l], cfg.w_bound)
    params._E_colsq = None
    return params


def sparse_learn(state: SpncnState, params: SpncnParams, cfg: SpncnConfig) -> list[bool]:
    """Same result as ``apply_updates(params, compute_updates(state))`` for lam == 0.

    Only the columns of W[l] and rows of E[l] belonging to units that
    spiked are touched.  Returns, per layer, whether an update happened.
    """
    if params._E_colsq is None:
        params._E_colsq = [None] + [np.einsum("ij,ij->j", E, E) for E in params.E[1:]]
    a, b, bound = cfg.alpha_u, cfg.beta, cfg.w_bound
    events = [False]
    for l in range(1, state.L + 1):
        idx = np.flatnonzero(state.s[l])
        if idx.size == 0:
            events.append(False)
            continue
        e = state.e[l - 1]
        if not np.all(np.isfinite(e)):
            raise NumericInputError(f"non-finite error signal at layer {l - 1}")
        # W[:, idx] -= a * e s^T restricted to spiking columns
        W = params.W[l]
        cols = W[:, idx] - a * e[:, None]
        norms = np.sqrt(np.einsum("ij,ij->j", cols, cols))
        over = norms > bound
        if np.any(over):
            cols[:, over] *= bound / norms[over]
        W[:, idx] = cols

        E = params.E[l]
        colsq = params._E_colsq[l]
        old = E[idx, :]
        new = old + (a * b) * e[None, :]
        colsq += np.einsum("ij,ij->j", new, new) - np.einsum("ij,ij->j", old, old)
        E[idx, :] = new
        over = colsq > bound * bound
        if np.any(over):
            exact = np.sqrt(np.einsum("ij,ij->j", E[:, over], E[:, over]))
            scale = np.minimum(1.0, bound / exact)
            E[:, over] *= scale
            colsq[over] = exact ** 2 * scale ** 2
        events.append(True)
    return events


def refresh_norm_cache(params: SpncnParams) -> None:
    params._E_colsq = None


def classify_readout(y_mean) -> int:
    """Argmax with ties going to the lowest index."""
    y_mean = np.asarray(y_mean)
    if y_mean.size == 0:
        raise ValueError("empty readout vector")
    return int(np.argmax(y_mean))


@dataclass
class StimulusResult:
    x_hat: np.ndarray       # mean prediction of the x-block
    y_hat: np.ndarray       # mean prediction of the y-block
    x_target: np.ndarray    # mean sensory x-trace
    spike_sum: list         # per-layer spike counts per unit over the window
    update_events: list     # per-layer number of ticks with a weight update
    n_ticks: int


class SpNCN:
    """A network plus everything needed to present stimuli to it.

    Parameters
    ----------
    cfg : SpncnConfig
    lif : LifConfig
        Neuron constants; ``lif.dt`` is the simulation step.
    trace : TraceConfig
    encoder : EncoderConfig
        Rate coding of stimuli and labels.  Its ``dt`` must match ``lif.dt``.
    seed : int or SeedSequence
        Seeds the weight initialisation.
    srm : SpikeResponseModel, optional
        Defaults to LIF with ``lif``.
    """

    def __init__(self, cfg: SpncnConfig, lif: LifConfig, trace: TraceConfig,
                 encoder: EncoderConfig, seed=0, srm: SpikeResponseModel | None = None):
        if abs(encoder.dt - lif.dt) > 1e-12:
            raise ValueError("encoder and neuron must share the same time step")
        self.cfg = cfg
        self.lif = lif
        self.trace = trace
        self.encoder = encoder
        self.srm = srm or LIF(lif)
        self.params, self.state = build(cfg, seed, self.srm)
        self.clock = 0   # ticks simulated so far, used to locate numeric failures

    @property
    def dt(self) -> float:
        return self.lif.dt

    def ticks(self, duration_ms: float) -> int:
        return int(round(duration_ms / self.dt))

    def reset(self) -> None:
        reset_state(self.state, self.srm)

    def present(self, x, label: int | None, T_st: float, T_ist: float, rng: np.random.Generator,
                learn: bool = True, labeled: bool | None = None) -> StimulusResult:
        """Show one sample for ``T_st`` ms, then relax for ``T_ist`` ms.

        ``x`` is the raw stimulus (scaled by ``encoder.max_pixel``).  With
        ``label=None`` (or ``labeled=False``) the y-block errors are
        clamped to zero.  Learning, when on, happens every stimulus tick;
        the relaxation phase never learns.
        """
        if T_st <= 0:
            raise ValueError("stimulus time must be positive")
        try:
            return present_stimulus(self, x, label, T_st, T_ist, rng, learn, labeled)
        except NumericInputError as exc:
            if exc.step is not None:
                raise
            raise NumericInputError(str(exc), step=self.clock) from None

    def predict(self, x, T: float, rng: np.random.Generator, reset: bool = True) -> StimulusResult:
        if reset:
            self.reset()
        return self.present(x, None, T, 0.0, rng, learn=False)


def present_stimulus(net: SpNCN, x, label, T_st, T_ist, rng, learn=True, labeled=None) -> StimulusResult:
    cfg, state, params = net.cfg, net.state, net.params
    ny, nx = cfg.label_size, cfg.x_size
    rates = encode.to_rates(x, net.encoder)
    if rates.shape != (nx,):
        raise ShapeError(f"stimulus has shape {rates.shape}, expected ({nx},)")
    if labeled is None:
        labeled = label is not None
    p_x = encode.spike_prob(rates, net.dt)
    p_y = None
    if ny and labeled:
        p_y = encode.spike_prob(encode.encode_label(label, ny, net.encoder.K), net.dt)

    hybrid = cfg.lam > 0.0
    L = cfg.L
    events = [0] * (L + 1)
    begin_window(state)
    for _ in range(net.ticks(T_st)):
        xs = (rng.random(nx) < p_x).astype(float)
        ys = (rng.random(ny) < p_y).astype(float) if p_y is not None else None
        step_states(state, params, SensoryInput(xs, ys, labeled=labeled), cfg, net.srm, net.trace)
        net.clock += 1
        if learn:
            if hybrid:
                apply_updates(params, stdp_hybrid_updates(state, params, cfg), cfg)
                fired = [False] + [bool(state.s[l].any()) for l in range(1, L + 1)]
            else:
                fired = sparse_learn(state, params, cfg)
            for l in range(1, L + 1):
                events[l] += fired[l]

    n = state.n_ticks
    result = StimulusResult(
        x_hat=state.zmu0_sum[:nx] / n,
        y_hat=state.zmu0_sum[nx:] / n,
        x_target=state.z0_sum[:nx] / n,
        spike_sum=[a.copy() for a in state.spike_sum],
        update_events=events,
        n_ticks=n,
    )
    if learn:
        for l in range(1, L + 1):
            state.update_events[l] += events[l]

    quiet = SensoryInput(np.zeros(nx), None, labeled=False, clamp_errors=True)
    for _ in range(net.ticks(T_ist)):
        step_states(state, params, quiet, cfg, net.srm, net.trace)
        net.clock += 1
    return result
