import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepga.problems import (
    GEN_DEFAULT_RISK, BsParams, HjbParams, bs_generator, bs_terminal, hjb_generator,
    hjb_terminal, make_bs_problem, make_hjb_problem, q_intensity, q_intensity_slope,
)


def test_intensity_regions():
    p = BsParams()
    assert q_intensity(49.999, p) == pytest.approx(0.2)
    assert q_intensity(50.0, p) == pytest.approx(0.2)
    assert q_intensity(60.0, p) == pytest.approx(0.11)
    assert q_intensity(70.0, p) == pytest.approx(0.02)
    assert q_intensity(1e6, p) == pytest.approx(0.02)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3))
def test_intensity_within_bounds(y):
    p = BsParams()
    q = q_intensity(y, p)
    assert p.gamma_l - 1e-15 <= q <= p.gamma_h + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 120.0))
def test_intensity_slope_matches_difference_quotient(y):
    p = BsParams()
    h = 1e-6
    if min(abs(y - p.v_h), abs(y - p.v_l)) < 2 * h:
        return
    fd = (q_intensity(y + h, p) - q_intensity(y - h, p)) / (2 * h)
    assert q_intensity_slope(y, p) == pytest.approx(fd, abs=1e-7)


def test_bs_generator_value():
    p = BsParams()
    # Q(60) = 0.11: f = -(1/3)(0.11)(60) - 0.02*60
    assert bs_generator(0.0, None, 60.0, None, p) == pytest.approx(-(1 / 3) * 0.11 * 60 - 1.2)
    z = np.ones((3, 5))
    assert np.allclose(bs_generator(0.0, None, np.full(3, 80.0), z, p), -(1 / 3) * 0.02 * 80 - 1.6)


def test_hjb_generator_and_terminal():
    z = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert np.allclose(hjb_generator(0.0, None, None, z, HjbParams(lam=2.0)), [-5.0, 0.0])
    assert hjb_terminal(np.zeros(100)) == pytest.approx(np.log(0.5))
    assert hjb_terminal(np.array([1.0, 0.0])) == pytest.approx(0.0)


def test_bs_terminal_is_min_and_rejects_empty():
    x = np.array([[3.0, 1.0, 2.0], [5.0, 7.0, 6.0]])
    assert np.array_equal(bs_terminal(x), [1.0, 5.0])
    with pytest.raises(ValueError):
        bs_terminal(np.empty((2, 0)))


@pytest.mark.parametrize("kwargs", [dict(v_h=70.0, v_l=50.0), dict(gamma_h=0.01),
                                    dict(delta=1.0), dict(delta=-0.1)])
def test_bs_params_invariants(kwargs):
    with pytest.raises(ValueError):
        BsParams(**kwargs)


def test_constant_intensity_allowed():
    p = BsParams(gamma_h=0.02, gamma_l=0.02)
    assert q_intensity(10.0, p) == q_intensity(90.0, p) == 0.02


def test_hjb_params_reject_negative():
    with pytest.raises(ValueError):
        HjbParams(lam=-1.0)


def test_problem_structure():
    bs = make_bs_problem(d=3, N=4)
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(bs.drift(0.0, x), 0.02 * x)
    assert np.allclose(bs.diffusion(0.0, x), 0.1 * np.diag(x))
    assert bs.dt == pytest.approx(0.25)
    assert bs.generator.kind == GEN_DEFAULT_RISK
    hjb = make_hjb_problem(d=2)
    assert np.allclose(hjb.diffusion(0.0, x[:2]), np.sqrt(2) * np.eye(2))
    assert np.array_equal(hjb.x0, np.zeros(2))
    with pytest.raises(ValueError):
        hjb.x0[0] = 1.0


def test_generator_derivatives_match_finite_differences():
    gen = make_bs_problem().generator
    for y in (30.0, 55.0, 65.0, 90.0):
        fd = (gen.value(y + 1e-6, 0.0) - gen.value(y - 1e-6, 0.0)) / 2e-6
        assert gen.d_y(y, 0.0) == pytest.approx(fd, rel=1e-6)
    hg = make_hjb_problem().generator
    assert hg.d_q(1.0, 2.0) == pytest.approx(-0.5)


def test_problem_rejects_bad_shapes():
    with pytest.raises(ValueError):
        make_bs_problem(d=0)
    with pytest.raises(ValueError):
        make_hjb_problem(d=2, x0=np.zeros(3))
    with pytest.raises(ValueError):
        make_bs_problem(T=0.0)


def test_describe_is_plain_data():
    desc = make_bs_problem(d=2).describe()
    assert desc["problem"] == "bs" and desc["dim"] == 2
    assert desc["params"]["sigma_hat"] == 0.1
