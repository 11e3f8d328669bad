"""16-bit fixed-point flow quantization and 32-bit word packing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlowlossError
from .flo import FlowField

DEFAULT_SCALE = 64  # steps per pixel-unit: +/-512 px range, 1/128 px worst-case error

_I16_MIN = -32768
_I16_MAX = 32767


@dataclass(frozen=True)
class QuantizedFlow:
    """Signed 16-bit fixed-point flow with a global per-file scale."""

    scale: int
    qu: np.ndarray  # (H, W) int16
    qv: np.ndarray  # (H, W) int16

    def __post_init__(self):
        if int(self.scale) < 1:
            raise FlowlossError(f"scale must be a positive integer, got {self.scale}")
        qu = np.ascontiguousarray(self.qu, dtype=np.int16)
        qv = np.ascontiguousarray(self.qv, dtype=np.int16)
        if qu.ndim != 2 or qu.shape != qv.shape:
            raise FlowlossError(f"qu/qv planes must be 2-D and equal-shaped, got {qu.shape} vs {qv.shape}")
        object.__setattr__(self, "scale", int(self.scale))
        object.__setattr__(self, "qu", qu)
        object.__setattr__(self, "qv", qv)

    @property
    def height(self) -> int:
        return self.qu.shape[0]

    @property
    def width(self) -> int:
        return self.qu.shape[1]


@dataclass(frozen=True)
class PackedImage:
    """One unsigned 32-bit word per pixel: u component in the high 16 bits."""

    words: np.ndarray  # (H, W) uint32

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint32)
        if words.ndim != 2:
            raise FlowlossError(f"words plane must be 2-D, got shape {words.shape}")
        object.__setattr__(self, "words", words)

    @property
    def height(self) -> int:
        return self.words.shape[0]

    @property
    def width(self) -> int:
        return self.words.shape[1]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))


def quantize(flow: FlowField, scale: int = DEFAULT_SCALE) -> QuantizedFlow:
    """Clamp to the representable range, scale, round half-away-from-zero."""
    scale = int(scale)
    if scale < 1:
        raise FlowlossError(f"scale must be >= 1, got {scale}")
    lo, hi = _I16_MIN / scale, _I16_MAX / scale

    def q(plane):
        clamped = np.clip(plane, lo, hi)
        return _round_half_away(clamped * scale).astype(np.int16)

    return QuantizedFlow(scale=scale, qu=q(flow.u), qv=q(flow.v))


def dequantize(q: QuantizedFlow) -> FlowField:
    """integer / scale, exact in float64."""
    s = float(q.scale)
    return FlowField(u=q.qu.astype(np.float64) / s, v=q.qv.astype(np.float64) / s)


def pack(q: QuantizedFlow) -> PackedImage:
    """word = (qu as u16) << 16 | (qv as u16)."""
    hi = q.qu.astype(np.uint16).astype(np.uint32) << np.uint32(16)
    lo = q.qv.astype(np.uint16).astype(np.uint32)
    return PackedImage(words=hi | lo)


def unpack(p: PackedImage, scale: int) -> QuantizedFlow:
    """Inverse of pack; two's-complement reinterpretation of each half-word."""
    qu = (p.words >> np.uint32(16)).astype(np.uint16).astype(np.int16)
    qv = (p.words & np.uint32(0xFFFF)).astype(np.uint16).astype(np.int16)
    return QuantizedFlow(scale=scale, qu=qu, qv=qv)
