# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled face kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, fabs

cnp.import_array()

cdef double LOGMEAN_SERIES = 1e-3
cdef double GRAD_SERIES = 1e-2


cdef inline double _log_ratio(double a, double b) nogil:
    cdef double q = a / b
    if q > 0.5 and q < 2.0:
        return log1p((a - b) / b)
    return log(a) - log(b)


cdef inline double _lm(double a, double b) nogil:
    cdef double r
    if a <= 0.0 or b <= 0.0:
        return 0.0
    r = _log_ratio(a, b)
    if fabs(r) < LOGMEAN_SERIES:
        return b * (1 + r * (1.0 / 2 + r * (1.0 / 6 + r * (1.0 / 24 + r / 120))))
    return (a - b) / r


cdef inline double _lm_grad(double a, double b) nogil:
    cdef double r
    if a <= 0.0 or b <= 0.0:
        return 0.0
    r = _log_ratio(a, b)
    if fabs(r) < GRAD_SERIES:
        return 1.0 / 2 + r * (-1.0 / 6 + r * (1.0 / 24 + r * (-1.0 / 120
                                + r * (1.0 / 720 - r / 5040))))
    return (r - 1 + b / a) / (r * r)


def log_mean(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    cdef double[::1] av = np.ascontiguousarray(a).ravel()
    cdef double[::1] bv = np.ascontiguousarray(b).ravel()
    out = np.empty(av.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    for k in range(av.shape[0]):
        ov[k] = _lm(av[k], bv[k])
    return out.reshape(shape)


def log_mean_grad(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    shape = a.shape
    cdef double[::1] av = np.ascontiguousarray(a).ravel()
    cdef double[::1] bv = np.ascontiguousarray(b).ravel()
    out = np.empty(av.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t k
    for k in range(av.shape[0]):
        ov[k] = _lm_grad(av[k], bv[k])
    return out.reshape(shape)


def edge_values(uK, uL, safeguard):
    cdef double[:, ::1] a = np.ascontiguousarray(uK, dtype=float)
    cdef double[:, ::1] b = np.ascontiguousarray(uL, dtype=float)
    cdef Py_ssize_t nf = a.shape[0], n = a.shape[1], f, i
    cdef bint sg = safeguard
    cdef double s
    out = np.empty((nf, n))
    cdef double[:, ::1] ue = out
    for f in range(nf):
        s = 0.0
        for i in range(n):
            ue[f, i] = _lm(a[f, i], b[f, i])
            s += ue[f, i]
        if sg and s > 1.0:
            for i in range(n):
                ue[f, i] /= s
    return out


def face_fluxes(uK, uL, tau, B, double astar, safeguard):
    cdef double[:, ::1] a = np.ascontiguousarray(uK, dtype=float)
    cdef double[:, ::1] b = np.ascontiguousarray(uL, dtype=float)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=float)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=float)
    cdef double[:, ::1] ue = edge_values(uK, uL, safeguard)
    cdef Py_ssize_t nf = a.shape[0], n = a.shape[1], f, i, j
    cdef double bu, bd
    out = np.empty((nf, n))
    cdef double[:, ::1] F = out
    for f in range(nf):
        for i in range(n):
            bu = 0.0
            bd = 0.0
            for j in range(n):
                bu += Bv[i, j] * ue[f, j]
                bd += Bv[i, j] * (b[f, j] - a[f, j])
            F[f, i] = -tv[f] * ((astar + bu) * (b[f, i] - a[f, i]) - ue[f, i] * bd)
    return out


def face_blocks(uK, uL, tau, B, double astar, safeguard):
    cdef double[:, ::1] a = np.ascontiguousarray(uK, dtype=float)
    cdef double[:, ::1] b = np.ascontiguousarray(uL, dtype=float)
    cdef double[::1] tv = np.ascontiguousarray(tau, dtype=float)
    cdef double[:, ::1] Bv = np.ascontiguousarray(B, dtype=float)
    cdef Py_ssize_t nf = a.shape[0], n = a.shape[1], f, i, j, k, m
    cdef bint sg = safeguard
    flux_arr = np.empty((nf, n))
    dK_arr = np.empty((nf, n, n))
    dL_arr = np.empty((nf, n, n))
    cdef double[:, ::1] F = flux_arr
    cdef double[:, :, ::1] dK = dK_arr
    cdef double[:, :, ::1] dL = dL_arr
    # per-face scratch
    raw_a = np.empty(n); ue_a = np.empty(n); du_a = np.empty(n)
    gK_a = np.empty(n); gL_a = np.empty(n); bu_a = np.empty(n); bd_a = np.empty(n)
    due_a = np.empty((n, n)); tmp_a = np.empty((n, n))
    cdef double[::1] raw = raw_a, ue = ue_a, du = du_a, gK = gK_a, gL = gL_a
    cdef double[::1] bu = bu_a, bd = bd_a
    cdef double[:, ::1] due = due_a, tmp = tmp_a
    cdef double s, t, inv, ddu, acc
    cdef bint over
    for f in range(nf):
        t = tv[f]
        s = 0.0
        for i in range(n):
            raw[i] = _lm(a[f, i], b[f, i])
            gK[i] = _lm_grad(a[f, i], b[f, i])
            gL[i] = _lm_grad(b[f, i], a[f, i])
            du[i] = b[f, i] - a[f, i]
            s += raw[i]
        over = sg and s > 1.0
        inv = 1.0 / s if over else 1.0
        for i in range(n):
            ue[i] = raw[i] * inv
        for i in range(n):
            bu[i] = 0.0
            bd[i] = 0.0
            for j in range(n):
                bu[i] += Bv[i, j] * ue[j]
                bd[i] += Bv[i, j] * du[j]
            F[f, i] = -t * ((astar + bu[i]) * du[i] - ue[i] * bd[i])
        # dF_i / d(ue_k)
        for i in range(n):
            for k in range(n):
                due[i, k] = -t * du[i] * Bv[i, k]
            due[i, i] += t * bd[i]
        if over:
            # right-multiply by d(ue)/d(raw) = I/s - raw e^T / s^2
            for i in range(n):
                acc = 0.0
                for k in range(n):
                    acc += due[i, k] * raw[k]
                for m in range(n):
                    tmp[i, m] = due[i, m] * inv - acc * inv * inv
            for i in range(n):
                for m in range(n):
                    due[i, m] = tmp[i, m]
        for i in range(n):
            for m in range(n):
                ddu = t * ue[i] * Bv[i, m]
                if i == m:
                    ddu -= t * (astar + bu[i])
                dK[f, i, m] = -ddu + due[i, m] * gK[m]
                dL[f, i, m] = ddu + due[i, m] * gL[m]
    return flux_arr, dK_arr, dL_arr
