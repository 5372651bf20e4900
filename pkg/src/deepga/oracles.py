"""Ground truth independent of the neural solvers.

* ``hjb_exact_mc``: Monte Carlo of the Cole-Hopf closed form of the HJB value,
  u(0, x0) = -(1/lam) ln E[exp(-lam g(x0 + sqrt(2) W_T))].
* ``bs_linear_closed_form``: the default-risk price when the intensity is
  constant and d = 1, plus a brute-force Euler cross-check.
* ``fixture``: published reference values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .paths import make_rng
from .problems import BsParams, HjbParams

_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleResult:
    value: float
    std_error: float
    n_samples: int
    method: str

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")

    def interval(self, k: float = 2.0):
        return self.value - k * self.std_error, self.value + k * self.std_error


def hjb_g_draws(d: int, T: float, x0, n_samples: int, seed) -> np.ndarray:
    """Samples of g(x0 + sqrt(2) W_T), generated in fixed-size chunks."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,)).copy()
    rng = make_rng(seed)
    out = np.empty(n_samples)
    for lo in range(0, n_samples, _CHUNK):
        hi = min(n_samples, lo + _CHUNK)
        out[lo:hi] = kernels.hjb_g_samples(rng, x0, T, hi - lo)
    return out


def hjb_value_from_draws(g: np.ndarray, lam: float) -> OracleResult:
    """Log-mean-exp estimate with a delta-method standard error."""
    n = g.size
    if lam == 0:
        return OracleResult(float(np.mean(g)), float(np.std(g, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
                            n, "hjb-mc-mean")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    # Shift by min(g) so every exponent is <= 0.
    g_min = float(g.min())
    w = np.exp(-lam * (g - g_min))
    m = float(np.mean(w))
    se = float(np.std(w, ddof=1) / (lam * m * np.sqrt(n))) if n > 1 else 0.0
    return OracleResult(g_min - np.log(m) / lam, se, n, "hjb-mc-logmeanexp")


def hjb_exact_mc(p: HjbParams | None = None, d: int = 100, T: float = 1.0, x0=0.0,
                 n_samples: int = 10**7, seed: int = 0) -> OracleResult:
    p = p or HjbParams()
    return hjb_value_from_draws(hjb_g_draws(d, T, x0, n_samples, seed), p.lam)


def hjb_lambda_sweep(lams, d: int = 100, T: float = 1.0, x0=0.0, n_samples: int = 10**6,
                     seed: int = 0) -> list[OracleResult]:
    """Common random numbers across lambda, so differences are sharper than the SEs."""
    g = hjb_g_draws(d, T, x0, n_samples, seed)
    return [hjb_value_from_draws(g, lam) for lam in lams]


def bs_linear_closed_form(p: BsParams, d: int = 1, T: float = 1.0, x0: float = 100.0) -> float:
    """x0 exp((mu_hat - r - (1 - delta) gamma) T) for constant intensity gamma, one asset."""
    if d != 1:
        raise ValueError("closed form holds for a single asset only")
    if p.gamma_h != p.gamma_l:
        raise ValueError("closed form needs a constant intensity (gamma_h == gamma_l)")
    if T < 0:
        raise ValueError("T must be non-negative")
    return float(x0 * np.exp((p.mu_hat - p.r - (1.0 - p.delta) * p.gamma_h) * T))


def bs_linear_euler_mc(p: BsParams, T: float = 1.0, x0: float = 100.0, n_steps: int = 1000,
                       n_samples: int = 10**6, seed: int = 0) -> OracleResult:
    """Euler paths of the asset, then the explicit backward Euler discount of the
    linear driver f = -c y: y_0 = E[X_N] / (1 + c dt)^N."""
    if p.gamma_h != p.gamma_l:
        raise ValueError("linear driver needs gamma_h == gamma_l")
    c = (1.0 - p.delta) * p.gamma_h + p.r
    dt = T / n_steps
    rng = make_rng(seed)
    x = np.full(n_samples, float(x0))
    sq = np.sqrt(dt)
    for _ in range(n_steps):
        x += p.mu_hat * x * dt + p.sigma_hat * x * sq * rng.standard_normal(n_samples)
    disc = (1.0 + c * dt) ** (-n_steps)
    return OracleResult(float(disc * x.mean()), float(disc * x.std(ddof=1) / np.sqrt(n_samples)),
                        n_samples, "bs-linear-euler-mc")


# Published reference values: multilevel Picard for BS, Monte Carlo for HJB.
FIXTURES = {
    "bs/sigma=0.1": 77.00, "bs/sigma=0.2": 57.32, "bs/sigma=0.3": 42.50,
    "bs/sigma=0.4": 32.12, "bs/sigma=0.5": 24.09,
    "bs/d=100": 77.00, "bs/d=200": 75.16, "bs/d=300": 74.18, "bs/d=400": 73.53,
    "bs/d=500": 72.99,
    "hjb/lam=1": 4.590, "hjb/lam=10": 4.493, "hjb/lam=20": 4.369, "hjb/lam=30": 4.247,
    "hjb/lam=40": 4.158, "hjb/lam=50": 4.096,
    "hjb/d=100": 4.590, "hjb/d=200": 5.291, "hjb/d=300": 5.699, "hjb/d=400": 5.988,
    "hjb/d=500": 6.212,
}


def fixture(label: str) -> float:
    try:
        return FIXTURES[label]
    except KeyError:
        raise KeyError(f"no reference value for {label!r}; known: {sorted(FIXTURES)}") from None


def reference_for(problem) -> tuple[float | None, str | None]:
    """Reference value for a problem built by the standard constructors, or (None, None)."""
    meta = problem.meta
    params = meta.get("params", {})
    label = None
    if meta.get("problem") == "bs":
        p = BsParams(**params)
        if problem.dim == 1 and p.gamma_h == p.gamma_l:
            return (bs_linear_closed_form(p, 1, problem.horizon, float(problem.x0[0])),
                    "closed form (constant intensity, one asset)")
        if problem.horizon == 1.0 and np.all(problem.x0 == 100.0):
            if problem.dim == 100 and p == BsParams(sigma_hat=p.sigma_hat):
                label = f"bs/sigma={p.sigma_hat:g}"
            elif p == BsParams():
                label = f"bs/d={problem.dim}"
        source = "published multilevel Picard value"
    elif meta.get("problem") == "hjb":
        lam = params.get("lam")
        if problem.horizon == 1.0 and np.all(problem.x0 == 0.0):
            if problem.dim == 100:
                label = f"hjb/lam={lam:g}"
            elif lam == 1.0:
                label = f"hjb/d={problem.dim}"
        source = "published Monte Carlo value"
    if label in FIXTURES:
        return FIXTURES[label], f"{source} ({label})"
    return None, None
