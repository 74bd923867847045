"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"SPNCNCK1"
    u32 config_len, config_len bytes of UTF-8 config text
    u32 n_matrices
    n_matrices x { u16 name_len, name (UTF-8), u64 rows, u64 cols,
                   rows*cols float64 values, row-major }
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import ShapeError

MAGIC = b"SPNCNCK1"


def save_checkpoint(path, matrices: dict[str, np.ndarray], config_text: str = "") -> None:
    cfg = config_text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        fh.write(struct.pack("<I", len(matrices)))
        for name, M in matrices.items():
            M = np.ascontiguousarray(M, dtype="<f8")
            if M.ndim != 2:
                raise ShapeError(f"{name} is not a matrix")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<QQ", *M.shape))
            fh.write(M.tobytes(order="C"))


def load_checkpoint(path) -> tuple[str, dict[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = 8

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise ValueError(f"{path}: truncated checkpoint")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    (clen,) = struct.unpack("<I", take(4))
    config_text = take(clen).decode("utf-8")
    (count,) = struct.unpack("<I", take(4))
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        rows, cols = struct.unpack("<QQ", take(16))
        out[name] = np.frombuffer(take(8 * rows * cols), dtype="<f8").reshape(rows, cols).copy()
    return config_text, out


def restore_into(params, path) -> str:
    """Copy matrices from a checkpoint into ``params`` (anything with ``.matrices()``).

    Every matrix of ``params`` must be present with the same shape.
    """
    config_text, stored = load_checkpoint(path)
    targets = params.matrices()
    for name, M in targets.items():
        if name not in stored:
            raise ShapeError(f"checkpoint has no matrix {name}")
        if stored[name].shape != M.shape:
            raise ShapeError(f"{name}: checkpoint shape {stored[name].shape}, model shape {M.shape}")
    for name, M in targets.items():
        M[...] = stored[name]
    if hasattr(params, "_E_colsq"):
        params._E_colsq = None
    return config_text
