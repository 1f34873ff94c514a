"""Bit-exact binary tensor format ("FBTF") shared by the CLI and the library.

Layout, all little-endian:

    magic   4 bytes  b"FBTF"
    version u32      1
    dtype   u8       0 = float32
    ndim    u8
    dims    u32 * ndim
    data    row-major float32 payload

A file may hold several tensors back to back (used for fusion weights:
one [out, in] matrix optionally followed by one [out] bias vector).
"""

from __future__ import annotations

import io
import struct

import numpy as np

__all__ = ["FormatError", "read_tensor", "write_tensor", "read_tensors", "write_tensors"]

MAGIC = b"FBTF"
VERSION = 1
DTYPE_F32 = 0


class FormatError(ValueError):
    """Malformed FBLT/FBTF payload: bad magic, version, bounds, or truncation."""


def write_tensor(arr: np.ndarray) -> bytes:
    """Serialize one float32 array."""
    a = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<IBB", VERSION, DTYPE_F32, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.tobytes()


def _read_exact(buf: io.BufferedIOBase, n: int, what: str) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise FormatError(f"truncated payload while reading {what}")
    return data


def read_tensor(buf) -> np.ndarray:
    """Read one tensor from bytes or a binary stream."""
    if isinstance(buf, (bytes, bytearray, memoryview)):
        buf = io.BytesIO(buf)
    magic = _read_exact(buf, 4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, dtype, ndim = struct.unpack("<IBB", _read_exact(buf, 6, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if ndim == 0:
        raise FormatError("tensor must have at least one dimension")
    dims = struct.unpack(f"<{ndim}I", _read_exact(buf, 4 * ndim, "dims"))
    count = 1
    for d in dims:
        if d == 0:
            raise FormatError(f"zero-sized dimension in {dims}")
        count *= d
    payload = _read_exact(buf, 4 * count, "tensor data")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_tensors(arrays) -> bytes:
    return b"".join(write_tensor(a) for a in arrays)


def read_tensors(data: bytes) -> list[np.ndarray]:
    """Read all back-to-back tensors in a buffer."""
    buf = io.BytesIO(data)
    out = []
    while buf.tell() < len(data):
        out.append(read_tensor(buf))
    return out


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)


def save_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(write_tensor(arr))
