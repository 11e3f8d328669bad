"""Pure-numpy evaluation of the per-patch loss and feature gradient.

Same contract as the compiled extension in _kernels.pyx; this module is
the import-time fallback when the extension is unavailable (or when
FLOWLOSS_BACKEND=python).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _patch_terms(feat_p, flow_p, sal_p, tau, sigma, eps):
    """Similarity vectors, distributions, KL and salient index for one patch.

    feat_p: (C, n) columns; flow_p: (2, n); sal_p: (n,) or None.
    Returns (s, z_f, p_f, p_v, kl, fhat, norms).
    """
    n = feat_p.shape[1]
    if sal_p is not None:
        s = int(np.argmax(sal_p))
    else:
        s = int(np.argmax(flow_p[0] ** 2 + flow_p[1] ** 2))

    # flow RBF similarity against the salient location
    ny = np.sqrt(flow_p[0] ** 2 + flow_p[1] ** 2)
    ns = ny[s]
    if ns < eps:
        cos = np.zeros(n)
    else:
        dots = flow_p[0] * flow_p[0, s] + flow_p[1] * flow_p[1, s]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(ny < eps, 0.0, dots / np.maximum(ny * ns, eps * eps))
    satcos = np.clip(cos, 0.0, 1.0)
    z_v = ny * np.exp((satcos - 1.0) / sigma)

    # feature cosine similarity after unit normalization
    norms = np.sqrt(np.sum(feat_p * feat_p, axis=0))
    fhat = feat_p / np.maximum(norms, eps)
    z_f = fhat.T @ fhat[:, s]

    def softmax(z):
        logits = z / tau
        e = np.exp(logits - logits.max())
        return e / e.sum()

    p_v = softmax(z_v)
    p_f = softmax(z_f)
    kl = float(np.sum(p_v * (np.log(p_v) - np.log(p_f))))
    return s, z_f, p_f, p_v, kl, fhat, norms


def patch_loss_pass(feat, flow, sal, origins, patch_size, tau, sigma, eps, want_grad):
    """Evaluate every window; returns (losses, motion_norms, salient, grad).

    feat: (C, H, W); flow: (2, H, W) already stabilized; sal: (H, W) or
    None; origins: (L, 2) int64.  grad is (C, H, W) when want_grad else
    None.  Motion weights are derived from motion_norms internally for the
    gradient; losses are returned unweighted.
    """
    C, H, W = feat.shape
    K = patch_size
    L = origins.shape[0]

    losses = np.zeros(L)
    motion = np.zeros(L)
    salient = np.zeros(L, dtype=np.int64)

    for p in range(L):
        r, c = origins[p]
        fl = flow[:, r : r + K, c : c + K].reshape(2, K * K)
        motion[p] = np.sqrt(np.sum(fl * fl))

    total_motion = motion.sum()
    if total_motion >= eps:
        weights = motion / total_motion
    else:
        weights = np.zeros(L)

    grad = np.zeros((C, H, W)) if want_grad else None

    for p in range(L):
        r, c = origins[p]
        fp = feat[:, r : r + K, c : c + K].reshape(C, K * K)
        fl = flow[:, r : r + K, c : c + K].reshape(2, K * K)
        sp = sal[r : r + K, c : c + K].reshape(K * K) if sal is not None else None

        s, z_f, p_f, p_v, kl, fhat, norms = _patch_terms(fp, fl, sp, tau, sigma, eps)
        losses[p] = kl
        salient[p] = s

        if not want_grad or weights[p] == 0.0:
            continue

        # dL/dz_f[i] = w_p * (p_f[i] - p_v[i]) / tau; then backprop the
        # cosine through unit normalization (both the i and the s branch)
        coef = weights[p] * (p_f - p_v) / tau
        N = np.maximum(norms, eps)
        deg = norms < eps
        fs = fhat[:, s]

        # d z[i] / d f_i = J_i^T fs, J = (I - fhat fhat^T)/N (or I/eps when degenerate)
        proj = coef * z_f
        proj[deg] = 0.0
        g = (np.outer(fs, coef) - fhat * proj) / N

        # d z[i] / d f_s = J_s^T fhat_i, summed over i
        acc = fhat @ coef
        if not deg[s]:
            acc = acc - float(coef @ z_f) * fs
        g[:, s] += acc / N[s]

        grad[:, r : r + K, c : c + K] += g.reshape(C, K, K)

    return losses, motion, salient, grad
