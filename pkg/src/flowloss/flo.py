"""Middlebury .flo reader/writer.

Layout: float32 magic 202021.25, int32 width, int32 height, then
width*height interleaved (u, v) float32 pairs, row-major, all little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, NonFiniteSample, NonPositiveDims, TruncatedPayload

FLO_MAGIC = 202021.25


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel 2-vector motion field, float64 in memory."""

    u: np.ndarray  # (H, W)
    v: np.ndarray  # (H, W)

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise NonPositiveDims(f"u/v planes must be 2-D and equal-shaped, got {u.shape} vs {v.shape}")
        if u.shape[0] < 1 or u.shape[1] < 1:
            raise NonPositiveDims(f"flow dims must be positive, got {u.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise NonFiniteSample("flow contains NaN or Inf samples")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]


def read_flo(data: bytes) -> FlowField:
    """Decode a .flo byte sequence, widening samples to float64 exactly."""
    if len(data) < 4:
        raise TruncatedPayload(f"need at least 4 bytes, got {len(data)}")
    (magic,) = struct.unpack_from("<f", data, 0)
    if magic != np.float32(FLO_MAGIC):
        raise BadMagic(magic)
    if len(data) < 12:
        raise TruncatedPayload(f"need at least 12 bytes for the header, got {len(data)}")
    width, height = struct.unpack_from("<ii", data, 4)
    if width < 1 or height < 1:
        raise NonPositiveDims(f"non-positive dims {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise TruncatedPayload(f"expected {expected} bytes for {width}x{height}, got {len(data)}")
    samples = np.frombuffer(data, dtype="<f4", offset=12).astype(np.float64)
    uv = samples.reshape(height, width, 2)
    return FlowField(u=uv[:, :, 0].copy(), v=uv[:, :, 1].copy())


def write_flo(flow: FlowField) -> bytes:
    """Encode a FlowField as .flo bytes (float64 narrowed round-to-nearest-even)."""
    header = struct.pack("<fii", FLO_MAGIC, flow.width, flow.height)
    uv = np.empty((flow.height, flow.width, 2), dtype="<f4")
    uv[:, :, 0] = flow.u
    uv[:, :, 1] = flow.v
    return header + uv.tobytes()
