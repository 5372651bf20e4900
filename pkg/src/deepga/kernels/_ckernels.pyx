# cython: language_level=3
"""Compiled twins of ``_pykernels``; same signatures, same semantics."""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

cdef enum:
    GEN_DEFAULT_RISK = 1
    GEN_QUADRATIC_GRADIENT = 2


def euler_paths(const double[::1] x0, const double[:, :, ::1] dW, const double[::1] dt,
                double drift_rate, double diff_scale, bint state_diag):
    cdef Py_ssize_t B = dW.shape[0], N = dW.shape[1], d = dW.shape[2]
    cdef Py_ssize_t b, n, j
    cdef double xn, h
    out = np.empty((B, N + 1, d))
    cdef double[:, :, ::1] X = out
    with nogil:
        for b in range(B):
            for j in range(d):
                X[b, 0, j] = x0[j]
            for n in range(N):
                h = dt[n]
                for j in range(d):
                    xn = X[b, n, j]
                    if state_diag:
                        X[b, n + 1, j] = xn + drift_rate * xn * h + diff_scale * xn * dW[b, n, j]
                    else:
                        X[b, n + 1, j] = xn + drift_rate * xn * h + diff_scale * dW[b, n, j]
    return out


cdef inline double _q_int(double y, const double* c) noexcept nogil:
    if y < c[4]:
        return c[2]
    if y >= c[5]:
        return c[3]
    return (c[2] - c[3]) / (c[4] - c[5]) * (y - c[4]) + c[2]


cdef inline double _f(int kind, const double* c, double y, double q) noexcept nogil:
    if kind == GEN_DEFAULT_RISK:
        return -(1.0 - c[1]) * _q_int(y, c) * y - c[0] * y
    if kind == GEN_QUADRATIC_GRADIENT:
        return -0.5 * c[0] * q
    return 0.0


cdef inline double _f_y(int kind, const double* c, double y) noexcept nogil:
    cdef double slope = 0.0
    if kind == GEN_DEFAULT_RISK:
        if y >= c[4] and y < c[5]:
            slope = (c[2] - c[3]) / (c[4] - c[5])
        return -(1.0 - c[1]) * (slope * y + _q_int(y, c)) - c[0]
    return 0.0


def bsde_forward(const double[::1] y0, const double[:, ::1] s, const double[:, ::1] q,
                 const double[::1] dt, int kind, const double[::1] coeffs):
    cdef Py_ssize_t N = s.shape[0], B = s.shape[1], C = y0.shape[0]
    cdef Py_ssize_t k, n, b
    cdef double yn
    cdef const double* c = &coeffs[0]
    out = np.empty((C, N + 1, B))
    cdef double[:, :, ::1] y = out
    with nogil:
        for k in range(C):
            for b in range(B):
                y[k, 0, b] = y0[k]
            for n in range(N):
                for b in range(B):
                    yn = y[k, n, b]
                    y[k, n + 1, b] = yn - _f(kind, c, yn, q[n, b]) * dt[n] + s[n, b]
    return out


def bsde_adjoint(const double[:, :, ::1] y, const double[:, ::1] dyN, const double[:, ::1] q,
                 const double[::1] dt, int kind, const double[::1] coeffs):
    cdef Py_ssize_t C = y.shape[0], N = y.shape[1] - 1, B = y.shape[2]
    cdef Py_ssize_t k, n, b
    cdef double fq = 0.0
    cdef const double* c = &coeffs[0]
    if kind == GEN_QUADRATIC_GRADIENT:
        fq = -0.5 * coeffs[0]
    ds_a = np.empty((C, N, B))
    dq_a = np.empty((C, N, B))
    dy0_a = np.empty((C, B))
    cdef double[:, :, ::1] ds = ds_a
    cdef double[:, :, ::1] dq = dq_a
    cdef double[:, ::1] dy0 = dy0_a
    lam_a = np.array(dyN, dtype=np.float64, order="C")
    cdef double[:, ::1] lam = lam_a
    cdef double h
    with nogil:
        for k in range(C):
            for n in range(N - 1, -1, -1):
                h = dt[n]
                for b in range(B):
                    ds[k, n, b] = lam[k, b]
                    dq[k, n, b] = -h * fq * lam[k, b]
                    lam[k, b] = lam[k, b] * (1.0 - h * _f_y(kind, c, y[k, n, b]))
            for b in range(B):
                dy0[k, b] = lam[k, b]
    return ds_a, dq_a, dy0_a


def hjb_g_samples(rng, const double[::1] x0, double horizon, Py_ssize_t n):
    cdef Py_ssize_t d = x0.shape[0], i, j
    cdef double scale = sqrt(2.0 * horizon), x, acc
    cdef bitgen_t* bg
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a BitGenerator capsule")
    bg = <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")
    out = np.empty(n)
    cdef double[::1] g = out
    with rng.bit_generator.lock, nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                x = x0[j] + scale * random_standard_normal(bg)
                acc = acc + x * x
            g[i] = log((1.0 + acc) / 2.0)
    return out
