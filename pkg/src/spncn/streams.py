"""Data sources and single-pass sample streams."""
from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import (BadMagicError, CountMismatchError, EmptyDatasetError,
                         ParseError, TruncatedFileError)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: int | None = None
    task_id: int | None = None
    T_st: float | None = None
    T_ist: float | None = None


@dataclass
class Dataset:
    X: np.ndarray                 # (n, d)
    y: np.ndarray | None = None   # (n,) ints

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], None if self.y is None else self.y[idx])

    def samples(self, order=None) -> Iterator[Sample]:
        order = range(len(self)) if order is None else order
        for i in order:
            yield Sample(self.X[i], None if self.y is None else int(self.y[i]))


# ---------------------------------------------------------------------------
# IDX / CSV ingestion

def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(buf: bytes, magic: int, ndim: int, what: str) -> np.ndarray:
    header = 4 + 4 * ndim
    if len(buf) < 4:
        raise TruncatedFileError(f"{what}: file shorter than its header")
    (got,) = struct.unpack(">I", buf[:4])
    if got != magic:
        raise BadMagicError(f"{what}: magic 0x{got:08x}, expected 0x{magic:08x}")
    if len(buf) < header:
        raise TruncatedFileError(f"{what}: file shorter than its header")
    dims = struct.unpack(">" + "I" * ndim, buf[4:header])
    n = math.prod(dims)
    if len(buf) - header < n:
        raise TruncatedFileError(f"{what}: expected {n} data bytes, found {len(buf) - header}")
    return np.frombuffer(buf, dtype=np.uint8, count=n, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image file (magic 0x803) and its label file (magic 0x801).

    Gzipped files are accepted when the name ends in ``.gz``.
    """
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, 3, "images")
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, 1, "labels")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(float)
    return Dataset(X, labels.astype(np.int64))


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Inverse of :func:`load_idx`; images must be (n, rows, cols) uint8."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_csv_vectors(path, labeled: bool = True) -> Dataset:
    """Numeric CSV, one sample per row; the last column is the label if ``labeled``."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"line {lineno}: {len(row)} fields, expected {width}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
    if not rows:
        raise EmptyDatasetError(f"{path} holds no samples")
    data = np.array(rows)
    if labeled:
        if width < 2:
            raise ParseError("labeled CSV needs at least one feature column")
        return Dataset(data[:, :-1], data[:, -1].astype(np.int64))
    return Dataset(data, None)


# ---------------------------------------------------------------------------
# bouncing balls

@dataclass
class BallState:
    pos: np.ndarray          # (n_balls, 2), (x, y) in pixel units
    vel: np.ndarray          # (n_balls, 2), pixels per frame
    size: int = 16
    radius: float = 2.0


def init_balls(rng: np.random.Generator, n_balls: int = 3, size: int = 16, radius: float = 2.0,
               speed: tuple[float, float] = (0.5, 1.5)) -> BallState:
    pos = rng.uniform(radius, size - radius, size=(n_balls, 2))
    sp = rng.uniform(*speed, size=n_balls)
    ang = rng.uniform(0.0, 2 * np.pi, size=n_balls)
    vel = np.stack([sp * np.cos(ang), sp * np.sin(ang)], axis=1)
    return BallState(pos, vel, size, radius)


def advance_balls(state: BallState) -> BallState:
    """Move every ball one frame, reflecting specularly off the walls."""
    lo, hi = state.radius, state.size - state.radius
    pos = state.pos + state.vel
    vel = state.vel.copy()
    # loop covers velocities larger than the box; one pass is the usual case
    while True:
        below, above = pos < lo, pos > hi
        if not (below.any() or above.any()):
            break
        pos = np.where(below, 2 * lo - pos, pos)
        pos = np.where(above, 2 * hi - pos, pos)
        vel = np.where(below | above, -vel, vel)
    return BallState(pos, vel, state.size, state.radius)


def render_balls(state: BallState) -> np.ndarray:
    """Filled discs of intensity 1 on a zero background; a pixel is lit when its centre is inside a disc."""
    c = np.arange(state.size) + 0.5
    xx, yy = np.meshgrid(c, c)  # xx varies along columns
    frame = np.zeros((state.size, state.size))
    for (bx, by) in state.pos:
        frame[(xx - bx) ** 2 + (yy - by) ** 2 <= state.radius ** 2] = 1.0
    return frame


def bouncing_ball_next(state: BallState, rng=None) -> tuple[BallState, np.ndarray]:
    new = advance_balls(state)
    return new, render_balls(new)


def bouncing_ball_frames(n_frames: int, rng: np.random.Generator, **kw) -> np.ndarray:
    """``(n_frames, size*size)`` flattened frames of one continuous video."""
    st = init_balls(rng, **kw)
    out = np.empty((n_frames, st.size * st.size))
    for k in range(n_frames):
        st, frame = bouncing_ball_next(st)
        out[k] = frame.ravel()
    return out


# ---------------------------------------------------------------------------
# X / O glyphs

def xo_patterns(size: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Binary 16x16 X (two 2-px diagonals) and O (ring, radius 6, 2 px thick)."""
    i, j = np.indices((size, size))
    diag = (i - j == 0) | (i - j == 1)
    anti = (i + j == size - 1) | (i + j == size)
    X = (diag | anti).astype(float)
    d = np.hypot(i + 0.5 - size / 2, j + 0.5 - size / 2)
    O = ((d >= 5.0) & (d < 7.0)).astype(float)
    return X, O


XO_TEST_SEQUENCE = "OOXXOXXXXOOXO"


def xo_dataset() -> Dataset:
    """Two samples: X is class 0, O is class 1."""
    X, O = xo_patterns()
    return Dataset(np.stack([X.ravel(), O.ravel()]), np.array([0, 1]))


# ---------------------------------------------------------------------------
# stream construction

def shuffled(dataset: Dataset, seed) -> list[Sample]:
    order = np.random.default_rng(seed).permutation(len(dataset))
    return list(dataset.samples(order))


def _task_of(y: int, pairs: Sequence[Sequence[int]]) -> int:
    for k, pair in enumerate(pairs):
        if y in pair:
            return k
    raise ValueError(f"label {y} belongs to no task")


def split_task_stream(dataset: Dataset, task_pairs: Sequence[Sequence[int]], p_f: float, seed) -> list[Sample]:
    """Tasks back to back, with boundary fuzzing.

    Every position is independently marked with probability ``p_f``; the
    marked samples are then permuted among the marked positions so that each
    lands in a different task's segment.  The stream stays a permutation of
    the data, so every sample is still seen exactly once.  No task ids are
    attached to the emitted samples.
    """
    if not 0.0 <= p_f <= 1.0:
        raise ValueError("p_f must lie in [0, 1]")
    flat = [c for pair in task_pairs for c in pair]
    if len(set(flat)) != len(flat):
        raise ValueError("task pairs overlap")
    if dataset.y is None:
        raise ValueError("split tasks need labels")
    rng = np.random.default_rng(seed)

    segments = []
    for pair in task_pairs:
        idx = np.flatnonzero(np.isin(dataset.y, pair))
        segments.append(rng.permutation(idx))
    order = np.concatenate(segments)
    seg_task = np.concatenate([np.full(len(s), k) for k, s in enumerate(segments)])

    marked = np.flatnonzero(rng.random(len(order)) < p_f)
    if marked.size:
        marked = _balance_marks(marked, seg_task, rng)
        order[marked] = order[marked][_cross_task_permutation(seg_task[marked], rng)]
    return [Sample(dataset.X[i], int(dataset.y[i])) for i in order]


def _balance_marks(marked: np.ndarray, seg_task: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Add positions from other tasks until no task holds more than half the marks.

    Only matters when few positions are marked, e.g. a single one, which has
    nobody to swap with.
    """
    is_marked = np.zeros(len(seg_task), bool)
    is_marked[marked] = True
    while True:
        counts = np.bincount(seg_task[is_marked], minlength=seg_task.max() + 1)
        top = int(counts.argmax())
        if counts[top] * 2 <= is_marked.sum():
            return np.flatnonzero(is_marked)
        pool = np.flatnonzero(~is_marked & (seg_task != top))
        if pool.size == 0:
            raise ValueError("one task dominates the stream; no cross-task fuzzing exists")
        is_marked[rng.choice(pool)] = True


def _cross_task_permutation(tasks: np.ndarray, rng: np.random.Generator, max_rounds: int = 10000) -> np.ndarray:
    """Random permutation ``perm`` with ``tasks[perm[i]] != tasks[i]`` for all i."""
    n = len(tasks)
    counts = np.bincount(tasks)
    if counts.max() * 2 > n:
        raise ValueError("one task dominates the fuzzed positions; no cross-task assignment exists")
    perm = rng.permutation(n)
    for _ in range(max_rounds):
        bad = np.flatnonzero(tasks[perm] == tasks)
        if bad.size == 0:
            return perm
        for i in bad:
            j = rng.integers(n)
            # swap if it fixes i and does not break j
            if tasks[perm[j]] != tasks[i] and tasks[perm[i]] != tasks[j]:
                perm[i], perm[j] = perm[j], perm[i]
    raise RuntimeError("could not build a cross-task permutation")


def mask_labels(stream: Iterable[Sample], p_u: float, seed) -> list[Sample]:
    """Drop each label independently with probability ``p_u``."""
    if not 0.0 <= p_u <= 1.0:
        raise ValueError("p_u must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    out = []
    for s in stream:
        out.append(replace(s, y=None) if rng.random() < p_u else s)
    return out


def task_splits(dataset: Dataset, task_pairs) -> list[Dataset]:
    return [dataset.subset(np.flatnonzero(np.isin(dataset.y, pair))) for pair in task_pairs]
