"""Dense tensor container: magic "FLKT0001", u32 rank, u32 dims, dtype byte, payload.

dtype codes: 0 = float64, 1 = float32.  Everything little-endian,
payload row-major.  Bit-exact round trip.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadTensorFile

MAGIC = b"FLKT0001"

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


def write_tensor(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array)
    code = _CODES.get(array.dtype)
    if code is None:
        raise BadTensorFile(f"unsupported dtype {array.dtype}; use float32 or float64")
    header = MAGIC + struct.pack("<I", array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    header += struct.pack("<B", code)
    return header + array.astype(_DTYPES[code]).tobytes()


def read_tensor(data: bytes) -> np.ndarray:
    if len(data) < 12 or data[:8] != MAGIC:
        raise BadTensorFile("bad tensor file magic")
    (rank,) = struct.unpack_from("<I", data, 8)
    need = 12 + 4 * rank + 1
    if rank < 1 or len(data) < need:
        raise BadTensorFile(f"truncated header for rank {rank}")
    dims = struct.unpack_from(f"<{rank}I", data, 12)
    (code,) = struct.unpack_from("<B", data, 12 + 4 * rank)
    dtype = _DTYPES.get(code)
    if dtype is None:
        raise BadTensorFile(f"unknown dtype code {code}")
    count = int(np.prod(dims))
    expected = need + count * dtype.itemsize
    if len(data) != expected:
        raise BadTensorFile(f"payload length {len(data) - need}, expected {expected - need}")
    return np.frombuffer(data, dtype=dtype, offset=need).reshape(dims).copy()
