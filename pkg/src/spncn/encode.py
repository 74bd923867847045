"""Poisson rate coding of real-valued vectors, and rate-code readout of spike counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EncoderConfig:
    K: float = 63.75          # max rate, Hz
    dt: float = 0.25          # ms
    max_pixel: float = 255.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.K * self.dt / 1000.0 > 1.0:
            raise ValueError("K * dt / 1000 exceeds 1; per-step spike probability is invalid")
        if not self.max_pixel > 0:
            raise ValueError("max_pixel must be positive")


def to_rates(x, cfg: EncoderConfig) -> np.ndarray:
    """Scale raw non-negative intensities to firing rates in [0, K] Hz."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("rate encoding needs non-negative inputs")
    return cfg.K * np.clip(x / cfg.max_pixel, 0.0, 1.0)


def spike_prob(r: np.ndarray, dt: float) -> np.ndarray:
    return np.minimum(np.asarray(r, dtype=float) * (dt / 1000.0), 1.0)


def poisson_step(r: np.ndarray, cfg: EncoderConfig, rng: np.random.Generator) -> np.ndarray:
    """One step of a Poisson spike train: spike where ``U(0,1) < r dt / 1000``."""
    p = spike_prob(r, cfg.dt)
    return (rng.random(p.shape) < p).astype(float)


def encode_label(label: int, n_classes: int, K: float) -> np.ndarray:
    if not 0 <= label < n_classes:
        raise ValueError(f"class {label} outside [0, {n_classes})")
    r = np.zeros(n_classes)
    r[label] = K
    return r


def rate_code_embedding(spike_sum, n_steps: int, gamma_c: float = 1.0) -> np.ndarray:
    """Time-averaged spike count, ``gamma_c / n_steps * spike_sum``."""
    if n_steps <= 0:
        raise ValueError("embedding needs at least one step")
    if not 0.0 < gamma_c <= 1.0:
        raise ValueError(f"gamma_c must lie in (0, 1], got {gamma_c}")
    return (gamma_c / n_steps) * np.asarray(spike_sum, dtype=float)
