"""Background motion removal and flow-norm map extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flo import FlowField

DEFAULT_EPS = 1e-12


@dataclass(frozen=True)
class ScalarMap:
    """Plane of non-negative per-pixel values (e.g. flow norms)."""

    values: np.ndarray  # (H, W) float64

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def stabilize(flow: FlowField, eps: float = DEFAULT_EPS) -> FlowField:
    """Subtract the per-channel mean and divide by the max absolute component.

    Output components lie in [-1, 1]; a constant field maps to the zero
    field (the eps guard defines the degenerate case).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    cu = flow.u - flow.u.mean()
    cv = flow.v - flow.v.mean()
    m = max(np.abs(cu).max(), np.abs(cv).max())
    if m < eps:
        z = np.zeros_like(cu)
        return FlowField(u=z, v=z.copy())
    return FlowField(u=cu / m, v=cv / m)


def flow_norm_map(flow: FlowField) -> ScalarMap:
    """Per-pixel L2 norm of the flow vector."""
    return ScalarMap(values=np.hypot(flow.u, flow.v))
