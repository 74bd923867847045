"""Feedforward spiking baselines trained without derivatives.

Both rules share the LIF neurons of the coding network.  The top layer is a
softmax over the last hidden layer's spikes, trained with the delta rule
``e_L s^T``.  Hidden layers get a signed, fixed random teaching signal:

* df-BFA projects the output error, ``d = sign(F @ (y_hat - y))``;
* df-DRTP projects the label itself, ``d = sign(P @ y)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encode
from .encode import EncoderConfig
from .exceptions import NumericInputError, ShapeError
from .network import StimulusResult, classify_readout, identity, project_columns
from .neuron import LIF, LifConfig, SpikeResponseModel

RULES = ("bfa", "drtp")


@dataclass(frozen=True)
class SnnConfig:
    layer_sizes: tuple[int, ...]   # (n_in, hidden..., n_classes)
    rule: str = "bfa"
    kappa: float = 0.9
    gamma: float = 0.0
    alpha_u: float = 0.0025
    w_bound: float = 20.0
    init_scale: float = 0.05
    fb_scale: float = 1.0

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3 or any(n <= 0 for n in sizes):
            raise ValueError(f"need input, at least one hidden layer and an output; got {sizes}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")

    @property
    def L(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class SnnParams:
    W: list   # W[l]: n_l x n_{l-1}, l = 1..L; W[L] feeds the softmax
    F: list   # F[l]: n_l x n_classes, l = 1..L-1 (fixed)
    P: list   # P[l]: n_l x n_classes, l = 1..L-1 (fixed)

    @property
    def L(self) -> int:
        return len(self.W) - 1

    def matrices(self) -> dict[str, np.ndarray]:
        out = {f"W{l}": self.W[l] for l in range(1, self.L + 1)}
        for l in range(1, self.L):
            out[f"F{l}"] = self.F[l]
            out[f"P{l}"] = self.P[l]
        return out


@dataclass
class SnnState:
    J: list
    neuron: list
    s: list
    y_hat: np.ndarray
    e_L: np.ndarray


@dataclass
class SnnDeltas:
    dW: list


def softmax(a: np.ndarray) -> np.ndarray:
    a = a - np.max(a)
    ex = np.exp(a)
    return ex / ex.sum()


def build_snn(cfg: SnnConfig, seed, srm: SpikeResponseModel | None = None) -> tuple[SnnParams, SnnState]:
    srm = srm or LIF(LifConfig())
    rng = np.random.default_rng(seed)
    n, L, c = cfg.layer_sizes, cfg.L, cfg.n_classes
    W, F, P = [None], [None], [None]
    for l in range(1, L + 1):
        W.append(project_columns(rng.normal(0.0, cfg.init_scale, size=(n[l], n[l - 1])), cfg.w_bound))
    for l in range(1, L):
        F.append(rng.normal(0.0, cfg.fb_scale, size=(n[l], c)))
        P.append(rng.normal(0.0, cfg.fb_scale, size=(n[l], c)))
    return SnnParams(W, F, P), _zero_state(cfg, srm)


def _zero_state(cfg: SnnConfig, srm: SpikeResponseModel) -> SnnState:
    n, L = cfg.layer_sizes, cfg.L
    return SnnState(
        J=[np.zeros(0)] + [np.zeros(n[l]) for l in range(1, L)],
        neuron=[None] + [srm.init_state(n[l]) for l in range(1, L)],
        s=[np.zeros(n[l]) for l in range(L)],
        y_hat=np.full(cfg.n_classes, 1.0 / cfg.n_classes),
        e_L=np.zeros(cfg.n_classes),
    )


def snn_forward_step(state: SnnState, params: SnnParams, s0: np.ndarray, cfg: SnnConfig,
                     srm: SpikeResponseModel) -> SnnState:
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (cfg.layer_sizes[0],):
        raise ShapeError(f"input spikes have shape {s0.shape}, expected ({cfg.layer_sizes[0]},)")
    k, g = cfg.kappa, cfg.gamma
    state.s[0] = s0
    for l in range(1, cfg.L):
        J = state.J[l]
        state.J[l] = (1.0 - k) * J + k * (-g * J + identity(params.W[l] @ state.s[l - 1]))
        state.neuron[l], state.s[l] = srm.step(state.neuron[l], state.J[l])
    state.y_hat = softmax(params.W[cfg.L] @ state.s[cfg.L - 1])
    return state


def _teaching_signals(state: SnnState, params: SnnParams, y: np.ndarray, rule: str) -> list:
    if rule == "bfa":
        return [None] + [np.sign(params.F[l] @ state.e_L) for l in range(1, params.L)]
    return [None] + [np.sign(params.P[l] @ y) for l in range(1, params.L)]


def _updates(state, params, y, cfg, rule) -> SnnDeltas:
    if y is None:
        raise ValueError("derivative-free baselines need a label for every update")
    y = np.asarray(y, dtype=float)
    state.e_L = state.y_hat - y
    d = _teaching_signals(state, params, y, rule)
    dW = [None] + [np.outer(d[l], state.s[l - 1]) for l in range(1, params.L)]
    dW.append(np.outer(state.e_L, state.s[params.L - 1]))
    return SnnDeltas(dW)


def df_bfa_updates(state: SnnState, params: SnnParams, y, cfg: SnnConfig) -> SnnDeltas:
    return _updates(state, params, y, cfg, "bfa")


def df_drtp_updates(state: SnnState, params: SnnParams, y, cfg: SnnConfig) -> SnnDeltas:
    return _updates(state, params, y, cfg, "drtp")


def apply_snn_updates(params: SnnParams, deltas: SnnDeltas, cfg: SnnConfig) -> SnnParams:
    for l in range(1, params.L + 1):
        dw = deltas.dW[l]
        if dw.shape != params.W[l].shape:
            raise ShapeError(f"delta for W{l} has shape {dw.shape}")
        if not np.all(np.isfinite(dw)):
            raise NumericInputError(f"non-finite update for W{l}")
        params.W[l] -= cfg.alpha_u * dw
        project_columns(params.W[l], cfg.w_bound)
    return params


def _sparse_learn(state: SnnState, params: SnnParams, y: np.ndarray, cfg: SnnConfig) -> None:
    """Equivalent to apply_snn_updates(..., _updates(...)), touching only pre-synaptic spike columns."""
    state.e_L = state.y_hat - y
    d = _teaching_signals(state, params, y, cfg.rule)
    d.append(state.e_L)
    a, bound = cfg.alpha_u, cfg.w_bound
    for l in range(1, params.L + 1):
        idx = np.flatnonzero(state.s[l - 1])
        if idx.size == 0:
            continue
        W = params.W[l]
        cols = W[:, idx] - a * d[l][:, None]
        norms = np.sqrt(np.einsum("ij,ij->j", cols, cols))
        over = norms > bound
        if np.any(over):
            cols[:, over] *= bound / norms[over]
        W[:, idx] = cols


class SpikingBaseline:
    """Feedforward LIF network trained online by df-BFA or df-DRTP."""

    def __init__(self, cfg: SnnConfig, lif: LifConfig, encoder: EncoderConfig, seed=0,
                 srm: SpikeResponseModel | None = None):
        if abs(encoder.dt - lif.dt) > 1e-12:
            raise ValueError("encoder and neuron must share the same time step")
        self.cfg = cfg
        self.lif = lif
        self.encoder = encoder
        self.srm = srm or LIF(lif)
        self.params, self.state = build_snn(cfg, seed, self.srm)
        self.clock = 0

    @property
    def dt(self) -> float:
        return self.lif.dt

    def ticks(self, duration_ms: float) -> int:
        return int(round(duration_ms / self.dt))

    def reset(self) -> None:
        self.state = _zero_state(self.cfg, self.srm)

    def present(self, x, label: int | None, T_st: float, T_ist: float, rng: np.random.Generator,
                learn: bool = True) -> StimulusResult:
        """Show one sample.  Learning needs a label; unlabeled samples only run inference."""
        try:
            return self._present(x, label, T_st, T_ist, rng, learn)
        except NumericInputError as exc:
            if exc.step is not None:
                raise
            raise NumericInputError(str(exc), step=self.clock) from None

    def _present(self, x, label, T_st, T_ist, rng, learn) -> StimulusResult:
        cfg = self.cfg
        rates = encode.to_rates(x, self.encoder)
        if rates.shape != (cfg.layer_sizes[0],):
            raise ShapeError(f"stimulus has shape {rates.shape}, expected ({cfg.layer_sizes[0]},)")
        p = encode.spike_prob(rates, self.dt)
        learn = learn and label is not None
        y = np.zeros(cfg.n_classes)
        if label is not None:
            y[label] = 1.0
        L = cfg.L
        y_sum = np.zeros(cfg.n_classes)
        spike_sum = [np.zeros(n) for n in cfg.layer_sizes[:-1]]
        events = [0] * L
        n = self.ticks(T_st)
        for _ in range(n):
            snn_forward_step(self.state, self.params, (rng.random(p.shape) < p).astype(float), cfg, self.srm)
            self.clock += 1
            y_sum += self.state.y_hat
            for l in range(L):
                spike_sum[l] += self.state.s[l]
            if learn:
                _sparse_learn(self.state, self.params, y, cfg)
                for l in range(1, L):
                    events[l] += bool(self.state.s[l - 1].any())
        zero = np.zeros(cfg.layer_sizes[0])
        for _ in range(self.ticks(T_ist)):
            snn_forward_step(self.state, self.params, zero, cfg, self.srm)
            self.clock += 1
        return StimulusResult(x_hat=np.zeros(0), y_hat=y_sum / n, x_target=np.zeros(0),
                              spike_sum=spike_sum, update_events=events, n_ticks=n)

    def predict(self, x, T: float, rng: np.random.Generator, reset: bool = True) -> StimulusResult:
        if reset:
            self.reset()
        return self.present(x, None, T, 0.0, rng, learn=False)

    def classify(self, result: StimulusResult) -> int:
        return classify_readout(result.y_hat)
