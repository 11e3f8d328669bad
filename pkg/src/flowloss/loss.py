"""Per-patch KL loss, motion weights, total loss, and the feature gradient.

The hot per-patch loop lives in a compiled extension (flowloss._kernels)
with a pure-numpy fallback (flowloss._kernels_py); the backend is picked
at import time, or forced with FLOWLOSS_BACKEND={cython,python}.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, LengthMismatch
from .flo import FlowField
from .patches import GridSpec, build_grid
from .similarity import LossParams

_forced = os.environ.get("FLOWLOSS_BACKEND", "").strip().lower()
if _forced == "python":
    from . import _kernels_py as _kernels
elif _forced == "cython":
    from . import _kernels  # noqa: F401  (raises if the extension is missing)
else:
    try:
        from . import _kernels
    except ImportError:
        from . import _kernels_py as _kernels

BACKEND = _kernels.BACKEND


@dataclass(frozen=True)
class FeatureMap:
    """C-channel dense feature tensor, float64 (C, H, W)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise DimMismatch(f"feature map must be (C, H, W), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DimMismatch("feature map contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel attention mass, float64 (H, W)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimMismatch(f"saliency map must be (H, W), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DimMismatch("saliency map contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LossReport:
    total: float
    per_patch: np.ndarray  # (L,)
    weights: np.ndarray  # (L,)
    salient: np.ndarray  # (L,) int64
    grid: GridSpec
    windows: tuple


def patch_kl(p_v: np.ndarray, p_f: np.ndarray) -> float:
    """D_KL(p_v || p_f) for two strictly positive distributions."""
    p_v = np.asarray(p_v, dtype=np.float64)
    p_f = np.asarray(p_f, dtype=np.float64)
    if p_v.shape != p_f.shape:
        raise LengthMismatch(f"distribution lengths differ: {p_v.shape} vs {p_f.shape}")
    return float(np.sum(p_v * (np.log(p_v) - np.log(p_f))))


def patch_weights(flow_patches, eps: float = 1e-12) -> np.ndarray:
    """Each patch's share of total frame motion; all zero when the frame is still."""
    norms = np.array([np.sqrt(np.sum(np.asarray(fp, dtype=np.float64) ** 2)) for fp in flow_patches])
    total = norms.sum()
    if total < eps:
        return np.zeros_like(norms)
    return norms / total


def _prepare(f: FeatureMap, flow: FlowField, saliency, params: LossParams):
    if (f.height, f.width) != (flow.height, flow.width):
        raise DimMismatch(
            f"feature map is {f.height}x{f.width} but flow is {flow.height}x{flow.width}"
        )
    sal = None
    if saliency is not None:
        sal = saliency.values
        if sal.shape != (f.height, f.width):
            raise DimMismatch(
                f"saliency map is {sal.shape[0]}x{sal.shape[1]} but features are {f.height}x{f.width}"
            )
    spec = GridSpec(height=f.height, width=f.width, patch_size=params.patch_size, stride=params.stride)
    grid = build_grid(spec)
    origins = np.array(grid.windows, dtype=np.int64).reshape(len(grid.windows), 2)
    flow3 = np.ascontiguousarray(np.stack([flow.u, flow.v]))
    return spec, grid, origins, flow3, sal


def _run(f: FeatureMap, flow: FlowField, saliency, params: LossParams, want_grad: bool):
    spec, grid, origins, flow3, sal = _prepare(f, flow, saliency, params)
    losses, motion, salient, grad = _kernels.patch_loss_pass(
        f.values, flow3, sal, origins, params.patch_size,
        params.tau, params.sigma, params.eps, want_grad,
    )
    total_motion = float(motion.sum())
    if total_motion >= params.eps:
        weights = motion / total_motion
    else:
        weights = np.zeros_like(motion)
    # sequential accumulation in window order, for bitwise reproducibility
    total = 0.0
    for p in range(len(losses)):
        total += weights[p] * losses[p]
    total = float(total)
    report = LossReport(
        total=total, per_patch=losses, weights=weights,
        salient=salient, grid=spec, windows=grid.windows,
    )
    return report, grad


def flow_loss(f: FeatureMap, flow: FlowField, saliency: SaliencyMap | None = None,
              params: LossParams = LossParams()) -> LossReport:
    """Motion-weighted sum of per-patch KL losses over all sliding windows.

    The flow is expected to be stabilized already (see preprocess.stabilize).
    """
    report, _ = _run(f, flow, saliency, params, want_grad=False)
    return report


def flow_loss_grad(f: FeatureMap, flow: FlowField, saliency: SaliencyMap | None = None,
                   params: LossParams = LossParams()):
    """Loss report plus d(total)/d(feature map), shape (C, H, W).

    Gradients flow only into the features; flow, saliency, and the motion
    weights are treated as constants.
    """
    report, grad = _run(f, flow, saliency, params, want_grad=True)
    return report, grad


def _per_patch_losses_highprec(feat, flow3, sal, origins, K, tau, sigma, eps):
    """Straight-line per-patch KL evaluation in extended precision.

    Independent of the kernel path; used by finite_diff_check so that the
    central difference is not drowned by float64 rounding of the loss.
    Salient selection runs in float64 to match the library exactly.
    """
    ld = np.longdouble
    featl = feat.astype(ld)
    flowl = flow3.astype(ld)
    tau, sigma, eps_l = ld(tau), ld(sigma), ld(eps)
    losses = np.zeros(origins.shape[0], dtype=ld)

    for p in range(origins.shape[0]):
        r, c = origins[p]
        fl64 = flow3[:, r : r + K, c : c + K].reshape(2, K * K)
        if sal is not None:
            s = int(np.argmax(sal[r : r + K, c : c + K].reshape(K * K)))
        else:
            s = int(np.argmax(fl64[0] ** 2 + fl64[1] ** 2))

        fp = featl[:, r : r + K, c : c + K].reshape(featl.shape[0], K * K)
        fv = flowl[:, r : r + K, c : c + K].reshape(2, K * K)

        ny = np.sqrt(fv[0] ** 2 + fv[1] ** 2)
        z_v = np.zeros(K * K, dtype=ld)
        for i in range(K * K):
            if ny[s] < eps_l or ny[i] < eps_l:
                cos = ld(0.0)
            else:
                cos = (fv[0, i] * fv[0, s] + fv[1, i] * fv[1, s]) / (ny[i] * ny[s])
            satcos = min(max(cos, ld(0.0)), ld(1.0))
            z_v[i] = ny[i] * np.exp((satcos - ld(1.0)) / sigma)

        norms = np.sqrt(np.sum(fp * fp, axis=0))
        fhat = fp / np.maximum(norms, eps_l)
        z_f = fhat.T @ fhat[:, s]

        def softmax(z):
            e = np.exp(z / tau - (z / tau).max())
            return e / e.sum()

        p_v = softmax(z_v)
        p_f = softmax(z_f)
        losses[p] = np.sum(p_v * (np.log(p_v) - np.log(p_f)))
    return losses


def finite_diff_check(f: FeatureMap, flow: FlowField, saliency: SaliencyMap | None = None,
                      params: LossParams = LossParams(), step: float = 1e-5,
                      samples: int | None = None, rng: np.random.Generator | None = None,
                      analytic_grad: np.ndarray | None = None):
    """Central-difference check of the analytic feature gradient.

    Checks every coordinate, or a random subset of `samples` coordinates
    for large inputs.  The perturbed losses are evaluated by an
    independent straight-line reimplementation in extended precision, so
    the central difference is not limited by float64 rounding of the
    loss.  Relative error uses max(|analytic|, |numeric|, 1e-8) as the
    denominator.  Returns a dict with max/mean relative error and the
    number of coordinates checked.

    analytic_grad substitutes an externally supplied gradient (test hook).
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if analytic_grad is None:
        _, analytic_grad = flow_loss_grad(f, flow, saliency, params)
    coords = [(c, h, w) for c in range(f.channels) for h in range(f.height) for w in range(f.width)]
    if samples is not None and samples < len(coords):
        rng = rng or np.random.default_rng(0)
        idx = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[i] for i in sorted(idx)]

    spec, grid, origins, flow3, sal = _prepare(f, flow, saliency, params)
    K = params.patch_size
    base_report = flow_loss(f, flow, saliency, params)
    weights = base_report.weights.astype(np.longdouble)

    def losses_at(values, subset):
        return _per_patch_losses_highprec(values, flow3, sal, origins[subset], K,
                                          params.tau, params.sigma, params.eps)

    errors = []
    base = f.values
    for c, h, w in coords:
        # only windows containing (h, w) change; the rest cancel exactly
        touched = np.nonzero(
            (origins[:, 0] <= h) & (h < origins[:, 0] + K)
            & (origins[:, 1] <= w) & (w < origins[:, 1] + K)
        )[0]
        bumped = base.copy()
        bumped[c, h, w] = base[c, h, w] + step
        hp = bumped[c, h, w]
        lp = losses_at(bumped, touched)
        bumped[c, h, w] = base[c, h, w] - step
        hm = bumped[c, h, w]
        lm = losses_at(bumped, touched)
        # effective step from the float64-representable bump values
        h2 = np.longdouble(hp) - np.longdouble(hm)
        numeric = float(np.sum(weights[touched] * (lp - lm)) / h2)
        analytic = analytic_grad[c, h, w]
        denom = max(abs(analytic), abs(numeric), 1e-8)
        errors.append(abs(analytic - numeric) / denom)

    errors = np.array(errors)
    return {
        "max_rel_error": float(errors.max()) if errors.size else 0.0,
        "mean_rel_error": float(errors.mean()) if errors.size else 0.0,
        "checked": len(coords),
    }
