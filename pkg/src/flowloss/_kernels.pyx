# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation of the per-patch loss and feature gradient.

Mirrors _kernels_py.patch_loss_pass; selected at import when available.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND = "cython"


def patch_loss_pass(cnp.float64_t[:, :, ::1] feat,
                    cnp.float64_t[:, :, ::1] flow,
                    sal,
                    cnp.int64_t[:, ::1] origins,
                    int patch_size,
                    double tau,
                    double sigma,
                    double eps,
                    bint want_grad):
    cdef int C = feat.shape[0]
    cdef int H = feat.shape[1]
    cdef int W = feat.shape[2]
    cdef int K = patch_size
    cdef int n = K * K
    cdef Py_ssize_t L = origins.shape[0]

    cdef cnp.ndarray losses_arr = np.zeros(L)
    cdef cnp.ndarray motion_arr = np.zeros(L)
    cdef cnp.ndarray salient_arr = np.zeros(L, dtype=np.int64)
    cdef cnp.float64_t[::1] losses = losses_arr
    cdef cnp.float64_t[::1] motion = motion_arr
    cdef cnp.int64_t[::1] salient = salient_arr

    cdef bint has_sal = sal is not None
    cdef cnp.float64_t[:, ::1] sal_mv
    if has_sal:
        sal_mv = sal

    cdef cnp.ndarray grad_arr = None
    cdef cnp.float64_t[:, :, ::1] grad
    if want_grad:
        grad_arr = np.zeros((C, H, W))
        grad = grad_arr

    # per-patch scratch
    cdef cnp.float64_t[::1] z_f = np.empty(n)
    cdef cnp.float64_t[::1] z_v = np.empty(n)
    cdef cnp.float64_t[::1] p_f = np.empty(n)
    cdef cnp.float64_t[::1] p_v = np.empty(n)
    cdef cnp.float64_t[::1] ny = np.empty(n)
    cdef cnp.float64_t[::1] norms = np.empty(n)
    cdef cnp.float64_t[:, ::1] fhat = np.empty((C, n))
    cdef cnp.float64_t[::1] coef = np.empty(n)
    cdef cnp.float64_t[::1] acc = np.empty(C)

    cdef Py_ssize_t p
    cdef int r0, c0, i, j, ch, s, ri, ci
    cdef double acc_m, ns, us, vs, dots, cos, satcos, best, val
    cdef double m, esum, kl, total_motion, wp, Ni, cz, fsch

    total_motion = 0.0
    for p in range(L):
        r0 = origins[p, 0]
        c0 = origins[p, 1]
        acc_m = 0.0
        for i in range(K):
            for j in range(K):
                acc_m += flow[0, r0 + i, c0 + j] * flow[0, r0 + i, c0 + j]
                acc_m += flow[1, r0 + i, c0 + j] * flow[1, r0 + i, c0 + j]
        motion[p] = sqrt(acc_m)
        total_motion += motion[p]

    for p in range(L):
        r0 = origins[p, 0]
        c0 = origins[p, 1]

        # salient location: strongest saliency, or largest flow norm
        s = 0
        best = -1.0
        for i in range(n):
            ri = r0 + i // K
            ci = c0 + i % K
            if has_sal:
                val = sal_mv[ri, ci]
            else:
                val = flow[0, ri, ci] * flow[0, ri, ci] + flow[1, ri, ci] * flow[1, ri, ci]
            if i == 0 or val > best:
                best = val
                s = i

        # flow RBF similarity
        for i in range(n):
            ri = r0 + i // K
            ci = c0 + i % K
            ny[i] = sqrt(flow[0, ri, ci] * flow[0, ri, ci] + flow[1, ri, ci] * flow[1, ri, ci])
        ns = ny[s]
        us = flow[0, r0 + s // K, c0 + s % K]
        vs = flow[1, r0 + s // K, c0 + s % K]
        for i in range(n):
            ri = r0 + i // K
            ci = c0 + i % K
            if ns < eps or ny[i] < eps:
                cos = 0.0
            else:
                dots = flow[0, ri, ci] * us + flow[1, ri, ci] * vs
                cos = dots / (ny[i] * ns)
            satcos = cos
            if satcos < 0.0:
                satcos = 0.0
            elif satcos > 1.0:
                satcos = 1.0
            z_v[i] = ny[i] * exp((satcos - 1.0) / sigma)

        # feature cosine similarity after unit normalization
        for i in range(n):
            ri = r0 + i // K
            ci = c0 + i % K
            acc_m = 0.0
            for ch in range(C):
                acc_m += feat[ch, ri, ci] * feat[ch, ri, ci]
            norms[i] = sqrt(acc_m)
            Ni = norms[i]
            if Ni < eps:
                Ni = eps
            for ch in range(C):
                fhat[ch, i] = feat[ch, ri, ci] / Ni
        for i in range(n):
            acc_m = 0.0
            for ch in range(C):
                acc_m += fhat[ch, i] * fhat[ch, s]
            z_f[i] = acc_m

        # max-shifted softmax for both vectors, then KL(p_v || p_f)
        m = z_v[0] / tau
        for i in range(1, n):
            if z_v[i] / tau > m:
                m = z_v[i] / tau
        esum = 0.0
        for i in range(n):
            p_v[i] = exp(z_v[i] / tau - m)
            esum += p_v[i]
        for i in range(n):
            p_v[i] /= esum

        m = z_f[0] / tau
        for i in range(1, n):
            if z_f[i] / tau > m:
                m = z_f[i] / tau
        esum = 0.0
        for i in range(n):
            p_f[i] = exp(z_f[i] / tau - m)
            esum += p_f[i]
        for i in range(n):
            p_f[i] /= esum

        kl = 0.0
        for i in range(n):
            kl += p_v[i] * (log(p_v[i]) - log(p_f[i]))
        losses[p] = kl
        salient[p] = s

        if not want_grad or total_motion < eps:
            continue
        wp = motion[p] / total_motion
        if wp == 0.0:
            continue

        for i in range(n):
            coef[i] = wp * (p_f[i] - p_v[i]) / tau

        # grad wrt f_i: coef_i * J_i^T fhat_s
        for i in range(n):
            ri = r0 + i // K
            ci = c0 + i % K
            Ni = norms[i]
            if Ni < eps:
                Ni = eps
            if norms[i] < eps:
                cz = 0.0
            else:
                cz = z_f[i]
            for ch in range(C):
                grad[ch, ri, ci] += coef[i] * (fhat[ch, s] - cz * fhat[ch, i]) / Ni

        # grad wrt f_s: sum_i coef_i * J_s^T fhat_i
        for ch in range(C):
            acc_m = 0.0
            for i in range(n):
                acc_m += fhat[ch, i] * coef[i]
            acc[ch] = acc_m
        if norms[s] >= eps:
            cz = 0.0
            for i in range(n):
                cz += coef[i] * z_f[i]
            for ch in range(C):
                acc[ch] -= cz * fhat[ch, s]
        Ni = norms[s]
        if Ni < eps:
            Ni = eps
        ri = r0 + s // K
        ci = c0 + s % K
        for ch in range(C):
            grad[ch, ri, ci] += acc[ch] / Ni

    return losses_arr, motion_arr, salient_arr, grad_arr
