"""Spike-response models and spike-train filters.

The network only talks to a neuron model through the pair
``init_state(n)`` / ``step(state, J) -> (state, spikes)``, so any
spike-response model that integrates an input current can be dropped in.
The leaky integrate-and-fire (LIF) model is the one provided here.

Units: time in milliseconds, voltage in decivolts.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .exceptions import NumericInputError, ShapeError


@dataclass(frozen=True)
class LifConfig:
    dt: float = 0.25
    tau_m: float = 20.0
    R_m: float = 1.0
    gamma_m: float = 1.0
    v_thr: float = 0.5
    v_reset: float = 0.0
    t_r: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if not self.v_thr > self.v_reset:
            raise ValueError("v_thr must exceed v_reset")
        if self.t_r < 0:
            raise ValueError(f"t_r must be non-negative, got {self.t_r}")

    @property
    def refractory_steps(self) -> int:
        # ceil, so the refractory period is never shorter than t_r
        return int(math.ceil(self.t_r / self.dt - 1e-12))


@dataclass(frozen=True)
class LifState:
    v: np.ndarray
    refrac: np.ndarray

    @classmethod
    def zeros(cls, n: int, v_reset: float = 0.0) -> "LifState":
        return cls(np.full(n, v_reset, dtype=float), np.zeros(n, dtype=np.int64))

    def __len__(self):
        return self.v.shape[0]


def lif_step(state: LifState, J: np.ndarray, cfg: LifConfig) -> tuple[LifState, np.ndarray]:
    """Advance a block of LIF units by one forward-Euler step.

    Non-refractory units integrate ``tau_m dv/dt = -gamma_m v + R_m J``;
    a unit spikes when its new voltage reaches ``v_thr``, after which its
    voltage is held at ``v_reset`` for ``refractory_steps`` further steps.

    Returns the new state and a float array of 0/1 spikes.
    """
    J = np.asarray(J, dtype=float)
    if J.shape != state.v.shape:
        raise ShapeError(f"current has shape {J.shape}, voltage has {state.v.shape}")
    if not np.isfinite(J).all():
        raise NumericInputError("non-finite input current")

    h = cfg.dt / cfg.tau_m
    v = state.v * (1.0 - h * cfg.gamma_m) + (h * cfg.R_m) * J
    fired = v >= cfg.v_thr
    refrac = state.refrac
    if refrac.any():
        held = refrac > 0
        v[held] = cfg.v_reset
        fired &= ~held
        refrac = np.maximum(refrac - 1, 0)
    else:
        refrac = refrac.copy()
    if fired.any():
        v[fired] = cfg.v_reset
        refrac[fired] = cfg.refractory_steps
    return LifState(v, refrac), fired.astype(float)


class SpikeResponseModel(Protocol):
    """Anything that maps (voltage state, current) to (voltage state, spikes)."""

    def init_state(self, n: int): ...

    def step(self, state, J: np.ndarray) -> tuple[object, np.ndarray]: ...


@dataclass(frozen=True)
class LIF:
    """`SpikeResponseModel` adapter around :func:`lif_step`."""

    cfg: LifConfig

    def init_state(self, n: int) -> LifState:
        return LifState.zeros(n, self.cfg.v_reset)

    def step(self, state: LifState, J: np.ndarray) -> tuple[LifState, np.ndarray]:
        return lif_step(state, J, self.cfg)


class FilterMode(enum.Enum):
    LOW_PASS = "low_pass"
    TRACE = "trace"


@dataclass(frozen=True)
class TraceConfig:
    alpha_f: float
    mode: FilterMode = FilterMode.TRACE

    def __post_init__(self):
        if not 0.0 < self.alpha_f < 1.0:
            raise ValueError(f"alpha_f must lie in (0, 1), got {self.alpha_f}")

    @classmethod
    def from_tau(cls, tau_f: float, dt: float, mode: FilterMode = FilterMode.TRACE) -> "TraceConfig":
        return cls(math.exp(-dt / tau_f), mode)


def trace_update(z: np.ndarray, s: np.ndarray, cfg: TraceConfig) -> np.ndarray:
    """Filter a binary spike vector into a bounded activity trace.

    ``LOW_PASS``: ``(1 - a) z + a s``.  ``TRACE``: ``a z (1 - s) + s``,
    i.e. decay between spikes and snap to 1 on a spike.
    """
    if np.shape(z) != np.shape(s):
        raise ShapeError(f"trace shape {np.shape(z)} != spike shape {np.shape(s)}")
    a = cfg.alpha_f
    if cfg.mode is FilterMode.LOW_PASS:
        return (1.0 - a) * z + a * s
    return a * z * (1.0 - s) + s


def exp_decay(dt: float, tau: float) -> float:
    """``exp(-dt / tau)``, the interpolation constant used for kappa and alpha_f."""
    return math.exp(-dt / tau)
