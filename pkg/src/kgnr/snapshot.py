"""Binary field snapshots (``KGNR1`` format, little-endian).

Layout::

    6s   magic  b"KGNR1\\0"
    u16  version (1)
    u32  n_per_dim
    f64  side_length
    f64  time
    f64  epsilon (0 when not applicable)
    u8   kind (0 real, 1 complex)
    n*n  f64 samples, or n*n (f64 re, f64 im) pairs, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .spectral import Field, TorusGrid

MAGIC = b"KGNR1\x00"
VERSION = 1
_HEADER = struct.Struct("<6sHIdddB")


def encode_snapshot(f: Field, time: float, epsilon: float = 0.0) -> bytes:
    kind = 0 if f.kind == "real" else 1
    head = _HEADER.pack(MAGIC, VERSION, f.grid.n, f.grid.side_length, time, epsilon, kind)
    dtype = "<f8" if kind == 0 else "<c16"
    return head + np.ascontiguousarray(f.values, dtype=dtype).tobytes()


def decode_snapshot(buf: bytes) -> tuple[Field, float, float]:
    if len(buf) < _HEADER.size:
        raise ConfigurationError("truncated KGNR1 header")
    magic, version, n, side, time, eps, kind = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ConfigurationError(f"bad snapshot magic {magic!r}")
    if version != VERSION:
        raise ConfigurationError(f"unsupported snapshot version {version}")
    if kind not in (0, 1):
        raise ConfigurationError(f"bad kind byte {kind}")
    dtype = "<f8" if kind == 0 else "<c16"
    expected = _HEADER.size + n * n * np.dtype(dtype).itemsize
    if len(buf) != expected:
        raise ConfigurationError(f"snapshot size {len(buf)} != expected {expected}")
    vals = np.frombuffer(buf, dtype=dtype, offset=_HEADER.size).reshape(n, n)
    grid = TorusGrid(n, side)
    return Field(grid, vals, "real" if kind == 0 else "complex"), time, eps


def write_snapshot(path, f: Field, time: float, epsilon: float = 0.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_snapshot(f, time, epsilon))
    return path


def read_snapshot(path) -> tuple[Field, float, float]:
    return decode_snapshot(Path(path).read_bytes())
