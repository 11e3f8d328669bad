"""Intra-patch similarity vectors and the temperature softmax.

A similarity vector holds, for every location i in a K x K patch, the
similarity between the patch's salient location and i: cosine similarity
for features, a norm-weighted RBF kernel for flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = 0.1
DEFAULT_SIGMA = 0.7
DEFAULT_EPS = 1e-12


@dataclass(frozen=True)
class LossParams:
    patch_size: int = 3
    stride: int = 3
    tau: float = DEFAULT_TAU
    sigma: float = DEFAULT_SIGMA
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


def select_salient(saliency_patch: np.ndarray) -> int:
    """Index of the maximum saliency value, ties broken by lowest index."""
    return int(np.argmax(np.asarray(saliency_patch, dtype=np.float64).reshape(-1)))


def fallback_salient(flow_patch: np.ndarray) -> int:
    """Index of the pixel with the largest flow L2 norm, ties to lowest index.

    Used when no saliency map is supplied.
    """
    fp = np.asarray(flow_patch, dtype=np.float64).reshape(2, -1)
    return int(np.argmax(fp[0] ** 2 + fp[1] ** 2))


def feature_similarity(feature_patch: np.ndarray, salient: int, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Cosine similarity of every location's feature against the salient one.

    Features are normalized to unit length with an eps guard, so a
    (near-)zero feature vector yields similarity 0 instead of NaN.
    """
    fp = np.asarray(feature_patch, dtype=np.float64).reshape(feature_patch.shape[0], -1)
    norms = np.sqrt(np.sum(fp * fp, axis=0))
    fhat = fp / np.maximum(norms, eps)
    return fhat.T @ fhat[:, salient]


def rbf_similarity(x: np.ndarray, y: np.ndarray, sigma: float = DEFAULT_SIGMA, eps: float = DEFAULT_EPS) -> float:
    """Flow similarity ||y|| * exp((satcos(x, y) - 1) / sigma).

    satcos clamps the cosine to [0, 1]; the cosine of a (near-)zero vector
    is defined as 0.  The ||y|| factor zeroes out stationary pixels.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = math.hypot(x[0], x[1])
    ny = math.hypot(y[0], y[1])
    if nx < eps or ny < eps:
        cos = 0.0
    else:
        cos = (x[0] * y[0] + x[1] * y[1]) / (nx * ny)
    satcos = min(max(cos, 0.0), 1.0)
    return ny * math.exp((satcos - 1.0) / sigma)


def flow_similarity(flow_patch: np.ndarray, salient: int, sigma: float = DEFAULT_SIGMA, eps: float = DEFAULT_EPS) -> np.ndarray:
    """RBF similarity of every location's flow against the salient one."""
    fp = np.asarray(flow_patch, dtype=np.float64).reshape(2, -1)
    s = fp[:, salient]
    return np.array([rbf_similarity(s, fp[:, i], sigma, eps) for i in range(fp.shape[1])])


def softmax_temp(z: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Max-shifted temperature softmax; strictly positive, sums to 1."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    logits = np.asarray(z, dtype=np.float64) / tau
    e = np.exp(logits - logits.max())
    return e / e.sum()
