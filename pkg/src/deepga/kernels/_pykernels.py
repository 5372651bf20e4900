"""Numpy implementations of the loop kernels.

Reference semantics for ``_ckernels``; every function here has a compiled twin with
the same signature.
"""

import numpy as np

from ..problems import GEN_DEFAULT_RISK, GEN_QUADRATIC_GRADIENT


def euler_paths(x0, dW, dt, drift_rate, diff_scale, state_diag):
    """Euler-Maruyama states, shape (batch, N+1, d), for linear drift and structured diffusion."""
    B, N, d = dW.shape
    X = np.empty((B, N + 1, d))
    X[:, 0, :] = x0
    for n in range(N):
        xn = X[:, n, :]
        if state_diag:
            X[:, n + 1, :] = xn + drift_rate * xn * dt[n] + diff_scale * xn * dW[:, n, :]
        else:
            X[:, n + 1, :] = xn + drift_rate * xn * dt[n] + diff_scale * dW[:, n, :]
    return X


def _f(kind, c, y, q):
    if kind == GEN_DEFAULT_RISK:
        r, delta, gh, gl, vh, vl = c[:6]
        slope = (gh - gl) / (vh - vl)
        Q = np.where(y < vh, gh, np.where(y >= vl, gl, slope * (y - vh) + gh))
        return -(1.0 - delta) * Q * y - r * y
    if kind == GEN_QUADRATIC_GRADIENT:
        return -0.5 * c[0] * q
    return np.zeros_like(y)


def _f_y(kind, c, y):
    if kind == GEN_DEFAULT_RISK:
        r, delta, gh, gl, vh, vl = c[:6]
        slope = (gh - gl) / (vh - vl)
        inside = (y >= vh) & (y < vl)
        Q = np.where(y < vh, gh, np.where(y >= vl, gl, slope * (y - vh) + gh))
        return -(1.0 - delta) * (np.where(inside, slope, 0.0) * y + Q) - r
    return np.zeros_like(y)


def bsde_forward(y0, s, q, dt, kind, coeffs):
    """Scalar BSDE recurrence y_{n+1} = y_n - f(y_n, q_n) dt_n + s_n for C initial values.

    ``s`` and ``q`` are (N, B): z_n . dW_n and |z_n|^2. Returns y with shape (C, N+1, B).
    """
    N, B = s.shape
    C = y0.shape[0]
    y = np.empty((C, N + 1, B))
    y[:, 0, :] = y0[:, None]
    for n in range(N):
        yn = y[:, n, :]
        y[:, n + 1, :] = yn - _f(kind, coeffs, yn, q[n]) * dt[n] + s[n]
    return y


def bsde_adjoint(y, dyN, q, dt, kind, coeffs):
    """Reverse sweep of ``bsde_forward``.

    Given dL/dy_N (C, B) returns (dL/ds, dL/dq, dL/dy_0) with shapes (C, N, B), (C, N, B), (C, B).
    """
    C, N1, B = y.shape
    N = N1 - 1
    ds = np.empty((C, N, B))
    dq = np.empty((C, N, B))
    lam = dyN.copy()
    fq = -0.5 * coeffs[0] if kind == GEN_QUADRATIC_GRADIENT else 0.0
    for n in range(N - 1, -1, -1):
        ds[:, n, :] = lam
        dq[:, n, :] = -dt[n] * fq * lam
        lam = lam * (1.0 - dt[n] * _f_y(kind, coeffs, y[:, n, :]))
    return ds, dq, lam


def hjb_g_samples(rng, x0, horizon, n):
    """Samples of ln((1 + |x0 + sqrt(2) W_T|^2) / 2) with W_T ~ N(0, T I), consuming
    exactly ``n * d`` standard normals from ``rng`` in row-major order."""
    d = x0.shape[0]
    W = rng.standard_normal((n, d))
    X = x0 + np.sqrt(2.0 * horizon) * W
    return np.log((1.0 + np.einsum("ij,ij->i", X, X)) / 2.0)
