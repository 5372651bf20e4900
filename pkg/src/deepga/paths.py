"""Seeded Brownian increments and Euler-Maruyama forward paths.

All generators are Philox (counter-based); independent lanes come from
``SeedSequence.spawn`` so parallel consumers never share a stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .problems import DIFF_DIAG_STATE, ProblemSpec


class DimensionMismatch(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int seed, a SeedSequence, or pass-through of a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def substreams(seed, names):
    """Named independent generators derived from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {name: make_rng(ss) for name, ss in zip(names, children)}


@dataclass(frozen=True)
class BrownianBatch:
    increments: np.ndarray  # (batch, N, d), entries ~ N(0, dt_n)
    step_sizes: np.ndarray  # (N,)

    @property
    def batch(self) -> int:
        return self.increments.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[1]

    @property
    def dim(self) -> int:
        return self.increments.shape[2]

    @property
    def horizon(self) -> float:
        return float(self.step_sizes.sum())


@dataclass(frozen=True)
class PathBatch:
    states: np.ndarray  # (batch, N+1, d)
    brownian: BrownianBatch
    problem_id: str

    @property
    def batch(self) -> int:
        return self.states.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1, :]


def sample_brownian(rng_seed, batch: int, n_steps: int, dim: int, horizon: float) -> BrownianBatch:
    """Increments on the uniform grid dt = horizon / n_steps.

    ``rng_seed`` may be an int (fresh Philox stream) or a live Generator, which is
    advanced; training loops pass one generator and draw a new batch per iteration.
    """
    for name, v in (("batch", batch), ("n_steps", n_steps), ("dim", dim)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    rng = make_rng(rng_seed)
    dt = horizon / n_steps
    dW = rng.standard_normal((batch, n_steps, dim)) * np.sqrt(dt)
    return BrownianBatch(increments=dW, step_sizes=np.full(n_steps, dt))


def simulate_forward(problem: ProblemSpec, brownian: BrownianBatch) -> PathBatch:
    """X_{n+1} = X_n + mu(t_n, X_n) dt_n + sigma(t_n, X_n) dW_n for n = 0..N-1."""
    if brownian.dim != problem.dim or brownian.n_steps != problem.n_steps:
        raise DimensionMismatch(
            f"brownian batch is (N={brownian.n_steps}, d={brownian.dim}) but problem "
            f"{problem.label} has (N={problem.n_steps}, d={problem.dim})"
        )
    X = kernels.euler_paths(
        problem.x0, brownian.increments, brownian.step_sizes,
        problem.drift_rate, problem.diffusion_scale,
        problem.diffusion_kind == DIFF_DIAG_STATE,
    )
    if not np.all(np.isfinite(X)):
        raise FloatingPointError(f"non-finite forward state for {problem.label}")
    if problem.diffusion_kind == DIFF_DIAG_STATE and np.any(X <= 0):
        warnings.warn(
            f"{int(np.sum(X <= 0))} non-positive asset prices in Euler paths; "
            "reduce sigma * dt", RuntimeWarning, stacklevel=2,
        )
    return PathBatch(states=X, brownian=brownian, problem_id=problem.label)


def sample_paths(problem: ProblemSpec, rng, batch: int) -> PathBatch:
    bm = sample_brownian(rng, batch, problem.n_steps, problem.dim, problem.horizon)
    return simulate_forward(problem, bm)
