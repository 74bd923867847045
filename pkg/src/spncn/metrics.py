"""Streaming and terminal evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeError


@dataclass
class PseAccumulator:
    """Prequential squared error with exponential forgetting.

    ``num`` and ``den`` are the decayed sums of errors and of weights, so
    ``value`` is the weighted mean ``sum a^(i-k) err_k / sum a^(i-k)``.
    """

    alpha: float = 0.995
    num: float = 0.0
    den: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def update(self, err: float) -> float:
        if err < 0:
            raise ValueError("squared error must be non-negative")
        self.num = self.alpha * self.num + err
        self.den = self.alpha * self.den + 1.0
        return self.value

    @property
    def value(self) -> float:
        return self.num / self.den if self.den > 0 else float("nan")


def pse_update(acc: PseAccumulator, err: float) -> PseAccumulator:
    out = PseAccumulator(acc.alpha, acc.num, acc.den)
    out.update(err)
    return out


def squared_error(xhat, x) -> float:
    xhat = np.asarray(xhat, dtype=float)
    x = np.asarray(x, dtype=float)
    if xhat.shape != x.shape:
        raise ShapeError(f"{xhat.shape} vs {x.shape}")
    d = xhat - x
    return float(d @ d)


class FramePredictor:
    """Predicts each frame by copying the one before it (zeros on a cold start)."""

    def __init__(self, dim: int):
        self.prev = np.zeros(dim)

    def predict(self) -> np.ndarray:
        return self.prev.copy()

    def observe(self, frame) -> None:
        self.prev = np.array(frame, dtype=float)


def frame_tminus1_predict(previous_frame) -> np.ndarray:
    return np.array(previous_frame, dtype=float)


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValueError("accuracy of an empty set")
    if predictions.shape != labels.shape:
        raise ShapeError("predictions and labels differ in length")
    return float(np.mean(predictions == labels))


def acc_continual(task_accuracies) -> float:
    """Mean terminal test accuracy over tasks."""
    task_accuracies = list(task_accuracies)
    if not task_accuracies:
        raise ValueError("no task accuracies")
    return float(np.mean(task_accuracies))


@dataclass
class RunMetrics:
    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        if self.rows and row["index"] <= self.rows[-1]["index"]:
            raise ValueError("stimulus index must increase")
        self.rows.append(row)
