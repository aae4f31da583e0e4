"""DEMB binary format: the file contract shared with the selection engine.

Layout (little-endian): magic "DEMB", version u32 = 1, rows u64, dim u32,
then rows x dim float32 row-major.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DEMB"
VERSION = 1
_HEADER = struct.Struct("<4sIQI")


def write_demb_atomic(path: str | Path, matrix: np.ndarray) -> None:
    """Write via a temp file + rename so partial outputs never survive."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float32))
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ValueError(f"need a 2-D matrix with dim >= 1, got shape {m.shape}")
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]))
            fh.write(m.tobytes(order="C"))
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def read_demb(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, rows, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not a DEMB v{VERSION} file")
    if len(raw) != _HEADER.size + rows * dim * 4:
        raise ValueError(f"{path}: payload size mismatch")
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dim)
