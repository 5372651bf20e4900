"""PDE/BSDE benchmark instances.

A problem is the tuple (mu, sigma, f, g, X0) of a semilinear parabolic PDE

    u_t + 1/2 Tr(sigma sigma^T Hess u) + mu . grad u + f(t, x, u, sigma^T grad u) = 0,
    u(T, x) = g(x).

Both benchmarks have generators that depend on ``z = sigma^T grad u`` only through
``|z|^2`` and on ``t, x`` not at all, so every generator here is described by a
scalar function ``f(y, q)`` with ``q = |z|^2``. The compiled kernels rely on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GEN_ZERO = 0
GEN_DEFAULT_RISK = 1
GEN_QUADRATIC_GRADIENT = 2

DIFF_DIAG_STATE = "diag_state"
DIFF_IDENTITY = "identity"


@dataclass(frozen=True)
class BsParams:
    """Default-risk Black-Scholes parameters (rates per year)."""

    r: float = 0.02
    delta: float = 2.0 / 3.0
    gamma_h: float = 0.2
    gamma_l: float = 0.02
    v_h: float = 50.0
    v_l: float = 70.0
    mu_hat: float = 0.02
    sigma_hat: float = 0.1

    def __post_init__(self):
        if not self.v_h < self.v_l:
            raise ValueError(f"need v_h < v_l, got v_h={self.v_h}, v_l={self.v_l}")
        if not self.gamma_h >= self.gamma_l:
            raise ValueError(
                f"need gamma_h >= gamma_l, got {self.gamma_h} < {self.gamma_l}"
            )
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"recovery delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class HjbParams:
    lam: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"control strength must be nonnegative, got {self.lam}")


def q_intensity(y, p: BsParams):
    """Piecewise-linear default intensity Q(y), from gamma_h below v_h to gamma_l above v_l."""
    y = np.asarray(y, dtype=float)
    slope = (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l)
    mid = slope * (y - p.v_h) + p.gamma_h
    out = np.where(y < p.v_h, p.gamma_h, np.where(y >= p.v_l, p.gamma_l, mid))
    return out[()] if out.ndim == 0 else out


def q_intensity_slope(y, p: BsParams):
    y = np.asarray(y, dtype=float)
    slope = (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l)
    out = np.where((y >= p.v_h) & (y < p.v_l), slope, 0.0)
    return out[()] if out.ndim == 0 else out


def bs_generator(t, x, y, z, p: BsParams):
    """f = -(1 - delta) Q(y) y - r y; independent of t, x and z."""
    y = np.asarray(y, dtype=float)
    return -(1.0 - p.delta) * q_intensity(y, p) * y - p.r * y


def hjb_generator(t, x, y, z, p: HjbParams):
    """f = -(lam / 2) |z|^2 for the forward process X = X0 + sqrt(2) W."""
    z = np.asarray(z, dtype=float)
    return -0.5 * p.lam * np.sum(z * z, axis=-1)


def bs_terminal(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 0:
        raise ValueError("terminal payoff needs at least one asset")
    return np.min(x, axis=-1)


def hjb_terminal(x):
    x = np.asarray(x, dtype=float)
    return np.log((1.0 + np.sum(x * x, axis=-1)) / 2.0)


@dataclass(frozen=True)
class Generator:
    """Generator ``f(y, q)`` with ``q = |z|^2``, tagged with a kernel code.

    ``coeffs`` is the flat float vector the kernels read:
    default risk -> (r, delta, gamma_h, gamma_l, v_h, v_l), quadratic -> (lam,).
    """

    kind: int
    coeffs: tuple = ()

    def value(self, y, q):
        y = np.asarray(y, dtype=float)
        if self.kind == GEN_ZERO:
            return np.zeros_like(y + np.asarray(q, dtype=float))
        if self.kind == GEN_DEFAULT_RISK:
            p = self._bs()
            return -(1.0 - p.delta) * q_intensity(y, p) * y - p.r * y
        if self.kind == GEN_QUADRATIC_GRADIENT:
            return -0.5 * self.coeffs[0] * np.asarray(q, dtype=float) + 0.0 * y
        raise ValueError(f"unknown generator kind {self.kind}")

    def d_y(self, y, q):
        y = np.asarray(y, dtype=float)
        if self.kind == GEN_DEFAULT_RISK:
            p = self._bs()
            return -(1.0 - p.delta) * (q_intensity_slope(y, p) * y + q_intensity(y, p)) - p.r
        return np.zeros_like(y + np.asarray(q, dtype=float))

    def d_q(self, y, q):
        y = np.asarray(y, dtype=float)
        if self.kind == GEN_QUADRATIC_GRADIENT:
            return np.full_like(y + np.asarray(q, dtype=float), -0.5 * self.coeffs[0])
        return np.zeros_like(y + np.asarray(q, dtype=float))

    def __call__(self, t, x, y, z):
        z = np.asarray(z, dtype=float)
        return self.value(y, np.sum(z * z, axis=-1))

    def _bs(self) -> BsParams:
        r, delta, gh, gl, vh, vl = self.coeffs
        return BsParams(r=r, delta=delta, gamma_h=gh, gamma_l=gl, v_h=vh, v_l=vl)

    @property
    def coeff_array(self) -> np.ndarray:
        out = np.zeros(8)
        out[: len(self.coeffs)] = self.coeffs
        return out


ZERO_GENERATOR = Generator(GEN_ZERO)


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable PDE instance.

    Drift is ``drift_rate * x`` and diffusion is ``diffusion_scale * diag(x)`` or
    ``diffusion_scale * I``; both apply in O(d).
    """

    label: str
    dim: int
    horizon: float
    n_steps: int
    x0: np.ndarray
    drift_rate: float
    diffusion_kind: str
    diffusion_scale: float
    generator: Generator
    terminal: Callable[[np.ndarray], np.ndarray]
    params: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1 or self.n_steps < 1:
            raise ValueError("dim and n_steps must be >= 1")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.diffusion_kind not in (DIFF_DIAG_STATE, DIFF_IDENTITY):
            raise ValueError(f"unsupported diffusion structure {self.diffusion_kind!r}")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape != (self.dim,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({self.dim},)")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def drift(self, t, x):
        return self.drift_rate * np.asarray(x, dtype=float)

    def diffusion(self, t, x):
        """Dense d x d diffusion matrix; for inspection only, the solvers never form it."""
        x = np.asarray(x, dtype=float)
        if self.diffusion_kind == DIFF_DIAG_STATE:
            return self.diffusion_scale * np.diag(x)
        return self.diffusion_scale * np.eye(self.dim)

    def f(self, t, x, y, z):
        return self.generator(t, x, y, z)

    def g(self, x):
        return self.terminal(x)

    def describe(self) -> dict:
        return {
            "label": self.label,
            "dim": self.dim,
            "horizon": self.horizon,
            "n_steps": self.n_steps,
            "x0": self.x0.tolist(),
            "drift_rate": self.drift_rate,
            "diffusion": {"kind": self.diffusion_kind, "scale": self.diffusion_scale},
            "generator": {"kind": self.generator.kind, "coeffs": list(self.generator.coeffs)},
            **self.meta,
        }


def make_bs_problem(p: BsParams | None = None, d: int = 100, T: float = 1.0, N: int = 40,
                    x0=100.0) -> ProblemSpec:
    """Nonlinear Black-Scholes with default risk: mu = mu_hat x, sigma = sigma_hat diag(x)."""
    p = p or BsParams()
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    gen = Generator(GEN_DEFAULT_RISK, (p.r, p.delta, p.gamma_h, p.gamma_l, p.v_h, p.v_l))
    return ProblemSpec(
        label=f"bs-d{d}-sigma{p.sigma_hat:g}",
        dim=d, horizon=T, n_steps=N, x0=x0,
        drift_rate=p.mu_hat,
        diffusion_kind=DIFF_DIAG_STATE, diffusion_scale=p.sigma_hat,
        generator=gen, terminal=bs_terminal, params=p,
        meta={"problem": "bs", "params": p.__dict__.copy()},
    )


def make_hjb_problem(p: HjbParams | None = None, d: int = 100, T: float = 1.0, N: int = 20,
                     x0=0.0) -> ProblemSpec:
    """HJB/LQG value function with forward process X = X0 + sqrt(2) W."""
    p = p or HjbParams()
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,))
    return ProblemSpec(
        label=f"hjb-d{d}-lam{p.lam:g}",
        dim=d, horizon=T, n_steps=N, x0=x0,
        drift_rate=0.0,
        diffusion_kind=DIFF_IDENTITY, diffusion_scale=np.sqrt(2.0),
        generator=Generator(GEN_QUADRATIC_GRADIENT, (p.lam,)),
        terminal=hjb_terminal, params=p,
        meta={"problem": "hjb", "params": p.__dict__.copy()},
    )
