"""Discrete BSDE rollout, the terminal-mismatch loss and its exact gradients.

For every path:  y_0 = u0,  z_0 = grad_u0,  z_n = subnet_n(X_n) for n >= 1,
y_{n+1} = y_n - f(t_n, X_n, y_n, z_n) dt_n + z_n . dW_n,  loss = mean (g(X_N) - y_N)^2.

z_n never depends on y, so many candidate values of u0 can share one subnet pass;
``candidate_losses`` exploits that for GA fitness and landscape sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .network import SolverParams, stack_backward, stack_forward
from .paths import PathBatch
from .problems import ProblemSpec


class NumericalError(FloatingPointError):
    """A solver produced a non-finite loss, gradient or fitness value."""


class RolloutError(NumericalError):
    """Non-finite value in the rollout; ``step`` is the first offending time index."""

    def __init__(self, message, step):
        super().__init__(f"{message} at time step {step}")
        self.step = step


@dataclass
class RolloutResult:
    terminal_estimates: np.ndarray  # (batch,) y_N
    loss: float
    cache: dict


def work_flops(problem: ProblemSpec, cfg, batch: int, n_candidates: int = 1,
               backward: bool = False, sample: bool = True) -> float:
    """Approximate floating-point work of one rollout, for the virtual clock."""
    N, d = problem.n_steps, problem.dim
    widths = [d] + cfg.widths(d) + [d]
    per_row = sum(2.0 * a * b for a, b in zip(widths[:-1], widths[1:])) + 10.0 * sum(widths)
    flops = (N - 1) * batch * per_row + 4.0 * batch * N * d + 10.0 * n_candidates * batch * N
    if backward:
        flops += 2.0 * (N - 1) * batch * per_row + 6.0 * batch * N * d
    if sample:
        flops += 8.0 * batch * N * d
    # interpreter and dispatch cost per time step, in flop equivalents
    flops += 4.0e5 * N * (3 if backward else 2)
    return flops


def _check_paths(params: SolverParams, problem: ProblemSpec, paths: PathBatch):
    B, N1, d = paths.states.shape
    if N1 - 1 != problem.n_steps or d != problem.dim:
        raise ValueError(f"paths of shape {paths.states.shape} do not belong to {problem.label}")
    if params.n_subnets != problem.n_steps - 1 or params.dim != problem.dim:
        raise ValueError(
            f"parameters hold {params.n_subnets} subnets of dim {params.dim}; "
            f"{problem.label} needs {problem.n_steps - 1} of dim {problem.dim}")


# Subnets evaluated per chunk when no backward cache is needed; bounds peak memory.
_CHUNK_ELEMENTS = 1 << 22


def compute_z(params: SolverParams, problem: ProblemSpec, paths: PathBatch, mode="train",
              keep_cache=True):
    """z_n for n = 0..N-1, time-major (N, B, d), plus the subnet cache.

    With ``keep_cache=False`` the subnets run a few at a time. Normalization
    statistics are per subnet, so the result is bitwise the same.
    """
    _check_paths(params, problem, paths)
    X = paths.states
    B = X.shape[0]
    Z = np.empty((problem.n_steps, B, problem.dim))
    Z[0] = params.grad_u0
    cache = None
    K = params.n_subnets
    if K and keep_cache:
        Xin = np.ascontiguousarray(X[:, 1:-1, :].transpose(1, 0, 2))
        Z[1:], cache = stack_forward(params.arrays, params.stats, params.cfg, Xin, mode)
    elif K:
        width = max(params.cfg.widths(problem.dim))
        step = max(1, _CHUNK_ELEMENTS // (B * width))
        for lo in range(0, K, step):
            hi = min(K, lo + step)
            arrays = {k: v[lo:hi] for k, v in params.arrays.items() if k not in ("u0", "grad_u0")}
            stats = {k: v[lo:hi] for k, v in params.stats.items()}
            Xin = np.ascontiguousarray(X[:, 1 + lo:1 + hi, :].transpose(1, 0, 2))
            Z[1 + lo:1 + hi], _ = stack_forward(arrays, stats, params.cfg, Xin, mode)
    if not np.all(np.isfinite(Z)):
        bad = np.where(~np.all(np.isfinite(Z), axis=(1, 2)))[0][0]
        raise RolloutError("non-finite z", int(bad))
    return Z, cache


def _propagate(problem, Z, dWt, y0s, dt):
    s = np.einsum("nbd,nbd->nb", Z, dWt)
    q = np.einsum("nbd,nbd->nb", Z, Z)
    gen = problem.generator
    y = kernels.bsde_forward(y0s, s, q, dt, gen.kind, gen.coeff_array)
    if not np.all(np.isfinite(y)):
        bad = np.where(~np.all(np.isfinite(y), axis=(0, 2)))[0][0]
        raise RolloutError("non-finite y", int(bad))
    return y, s, q


def rollout(params: SolverParams, problem: ProblemSpec, paths: PathBatch,
            u0_override=None, mode="train") -> RolloutResult:
    """Evaluate the loss; ``u0_override`` replaces theta_u0 without touching ``params``."""
    Z, sub_cache = compute_z(params, problem, paths, mode)
    dWt = np.ascontiguousarray(paths.brownian.increments.transpose(1, 0, 2))
    dt = paths.brownian.step_sizes
    y0 = params.u0 if u0_override is None else float(u0_override)
    y, s, q = _propagate(problem, Z, dWt, np.array([y0]), dt)
    g = problem.g(paths.terminal)
    residual = y[0, -1] - g
    loss = float(np.mean(residual * residual))
    cache = {"Z": Z, "dWt": dWt, "y": y, "q": q, "g": g, "residual": residual,
             "subnet": sub_cache, "dt": dt}
    return RolloutResult(terminal_estimates=y[0, -1], loss=loss, cache=cache)


def candidate_losses(params: SolverParams, problem: ProblemSpec, paths: PathBatch,
                     candidates, mode="train") -> np.ndarray:
    """Loss for each candidate u0 on one shared batch; params are read only."""
    candidates = np.asarray(candidates, dtype=float).reshape(-1)
    Z, _ = compute_z(params, problem, paths, mode, keep_cache=False)
    dWt = np.ascontiguousarray(paths.brownian.increments.transpose(1, 0, 2))
    y, _, _ = _propagate(problem, Z, dWt, candidates, paths.brownian.step_sizes)
    res = y[:, -1, :] - problem.g(paths.terminal)[None, :]
    return np.mean(res * res, axis=1)


def loss_and_grads(params: SolverParams, problem: ProblemSpec, paths: PathBatch):
    """Train-mode loss and exact gradients for every entry of ``params.arrays``.

    Returns ``(loss, grads, cache)``; ``cache['subnet']`` carries the batch
    statistics a training step feeds to ``update_running_stats``.
    """
    res = rollout(params, problem, paths, mode="train")
    c = res.cache
    B = paths.batch
    gen = problem.generator
    dyN = (2.0 / B) * c["residual"][None, :]
    ds, dq, dy0 = kernels.bsde_adjoint(c["y"], dyN, c["q"], c["dt"], gen.kind, gen.coeff_array)
    dZ = ds[0][:, :, None] * c["dWt"] + 2.0 * dq[0][:, :, None] * c["Z"]
    grads = {"u0": np.array([dy0.sum()]), "grad_u0": dZ[0].sum(axis=0)}
    if params.n_subnets:
        grads.update(stack_backward(params.arrays, params.cfg, c["subnet"], dZ[1:]))
    return res.loss, grads, c
