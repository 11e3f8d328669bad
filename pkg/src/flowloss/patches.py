"""Sliding-window decomposition of H x W grids into K x K patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PatchLargerThanGrid


@dataclass(frozen=True)
class GridSpec:
    height: int
    width: int
    patch_size: int
    stride: int

    def __post_init__(self):
        if self.patch_size < 1 or self.stride < 1:
            raise PatchLargerThanGrid(
                f"patch_size and stride must be >= 1, got K={self.patch_size}, stride={self.stride}"
            )
        if self.patch_size > min(self.height, self.width):
            raise PatchLargerThanGrid(
                f"patch size {self.patch_size} exceeds grid {self.height}x{self.width}"
            )


@dataclass(frozen=True)
class PatchGrid:
    """Row-major list of fully-contained window origins."""

    spec: GridSpec
    windows: tuple = field(default=())  # ((row, col), ...)

    @property
    def num_windows(self) -> int:
        return len(self.windows)


def window_count(spec: GridSpec) -> int:
    rows = (spec.height - spec.patch_size) // spec.stride + 1
    cols = (spec.width - spec.patch_size) // spec.stride + 1
    return rows * cols


def build_grid(spec: GridSpec) -> PatchGrid:
    """Enumerate all fully-contained windows; partial border windows are dropped."""
    rows = range(0, spec.height - spec.patch_size + 1, spec.stride)
    cols = range(0, spec.width - spec.patch_size + 1, spec.stride)
    windows = tuple((r, c) for r in rows for c in cols)
    assert len(windows) == window_count(spec)
    return PatchGrid(spec=spec, windows=windows)


def extract_patch(tensor: np.ndarray, window: tuple[int, int], patch_size: int) -> np.ndarray:
    """View of the K x K sub-block of every channel.

    Accepts (H, W) or (C, H, W) arrays; within-patch flattening order is
    row-major.
    """
    r, c = window
    return tensor[..., r : r + patch_size, c : c + patch_size]


def patch_flow_norm(flow_patch: np.ndarray) -> float:
    """Frobenius norm over all components of a (2, K, K) flow patch."""
    return float(np.sqrt(np.sum(np.asarray(flow_patch, dtype=np.float64) ** 2)))
