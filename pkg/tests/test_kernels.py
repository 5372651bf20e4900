"""The compiled core must agree with the numpy fallback."""

import numpy as np
import pytest

from deepga import kernels
from deepga.kernels import _pykernels
from deepga.paths import make_rng
from deepga.problems import make_bs_problem, make_hjb_problem

compiled = pytest.mark.skipif("cython" not in kernels.available_backends(),
                              reason="compiled kernels not built")


def _coeffs():
    return [(p.generator.kind, p.generator.coeff_array)
            for p in (make_bs_problem(d=1), make_hjb_problem(d=1))]


@compiled
@pytest.mark.parametrize("state_diag", [True, False])
def test_euler_bitwise(state_diag):
    rng = np.random.default_rng(0)
    dW = rng.normal(size=(7, 5, 3)) * 0.3
    args = (rng.uniform(50, 150, 3), dW, np.full(5, 0.2), 0.02, 0.1, state_diag)
    a = kernels.get_backend("python").euler_paths(*args)
    b = kernels.get_backend("cython").euler_paths(*args)
    assert np.array_equal(a, b)


@compiled
@pytest.mark.parametrize("kind,coeffs", _coeffs())
def test_forward_and_adjoint_agree(kind, coeffs):
    rng = np.random.default_rng(1)
    N, B = 6, 9
    y0 = rng.uniform(30, 90, 4)
    s = rng.normal(size=(N, B))
    q = rng.uniform(0, 2, (N, B))
    dt = np.full(N, 1 / N)
    ya = kernels.get_backend("python").bsde_forward(y0, s, q, dt, kind, coeffs)
    yb = kernels.get_backend("cython").bsde_forward(y0, s, q, dt, kind, coeffs)
    assert np.array_equal(ya, yb)
    dyN = rng.normal(size=(4, B))
    for u, v in zip(kernels.get_backend("python").bsde_adjoint(ya, dyN, q, dt, kind, coeffs),
                    kernels.get_backend("cython").bsde_adjoint(ya, dyN, q, dt, kind, coeffs)):
        assert np.allclose(u, v, rtol=1e-14, atol=0)


@compiled
def test_mc_kernel_consumes_the_same_stream():
    x0 = np.linspace(-1, 1, 5)
    a = kernels.get_backend("python").hjb_g_samples(make_rng(3), x0, 0.7, 1000)
    b = kernels.get_backend("cython").hjb_g_samples(make_rng(3), x0, 0.7, 1000)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_mc_kernel_formula():
    x0 = np.array([0.5, -0.2])
    rng = make_rng(4)
    g = kernels.hjb_g_samples(rng, x0, 2.0, 50)
    W = make_rng(4).standard_normal((50, 2))
    X = x0 + 2.0 * W  # sqrt(2 T) with T = 2
    assert np.allclose(g, np.log((1 + (X * X).sum(1)) / 2))


def test_adjoint_is_derivative_of_forward():
    """Perturbing s and y0 moves sum(w * y_N) by the adjoint's prediction."""
    p = make_bs_problem(d=1)
    kind, c = p.generator.kind, p.generator.coeff_array
    rng = np.random.default_rng(2)
    N, B = 5, 3
    y0 = np.array([61.0])
    s = rng.normal(size=(N, B))
    q = np.zeros((N, B))
    dt = np.full(N, 0.2)
    w = rng.normal(size=(1, B))
    y = _pykernels.bsde_forward(y0, s, q, dt, kind, c)
    ds, _, dy0 = _pykernels.bsde_adjoint(y, w, q, dt, kind, c)
    h = 1e-6
    for n in range(N):
        for b in range(B):
            sp, sm = s.copy(), s.copy()
            sp[n, b] += h
            sm[n, b] -= h
            fd = (np.sum(w * _pykernels.bsde_forward(y0, sp, q, dt, kind, c)[:, -1])
                  - np.sum(w * _pykernels.bsde_forward(y0, sm, q, dt, kind, c)[:, -1])) / (2 * h)
            assert ds[0, n, b] == pytest.approx(fd, rel=1e-6, abs=1e-9)
    fd0 = (np.sum(w * _pykernels.bsde_forward(y0 + h, s, q, dt, kind, c)[:, -1])
           - np.sum(w * _pykernels.bsde_forward(y0 - h, s, q, dt, kind, c)[:, -1])) / (2 * h)
    assert dy0.sum() == pytest.approx(fd0, rel=1e-6)


def test_use_backend_restores_and_rejects_unknown():
    before = kernels.backend_name()
    with kernels.use_backend("python"):
        assert kernels.backend_name() == "python"
    assert kernels.backend_name() == before
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
