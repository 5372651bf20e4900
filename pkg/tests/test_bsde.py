import numpy as np
import pytest

import deepga.bsde as bsde_mod
from deepga.bsde import BaselineConfig, initial_loss_sweep, train_deep_bsde
from deepga.network import NetConfig
from deepga.paths import make_rng
from deepga.problems import GEN_ZERO, Generator, HjbParams, make_hjb_problem
from deepga.report import VirtualClock, WallClock
from deepga.rollout import NumericalError


def small_hjb(d=2, N=4, lam=1.0):
    return make_hjb_problem(HjbParams(lam=lam), d=d, N=N)


@pytest.mark.parametrize("kwargs", [dict(iterations=0), dict(guess_interval=(2.0, 1.0)),
                                    dict(lr=0.0), dict(batch=0), dict(time_budget=-1.0)])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        BaselineConfig(**kwargs)


def test_point_interval_allowed():
    assert BaselineConfig(guess_interval=(3, 3)).guess_interval == (3.0, 3.0)


def test_trace_layout_and_determinism():
    cfg = BaselineConfig(guess_interval=(7.0, 8.0), iterations=45, report_every=10, lr=0.05,
                         batch=16, valid_batch=32, seed=4)
    a = train_deep_bsde(small_hjb(), cfg)
    b = train_deep_bsde(small_hjb(), cfg)
    assert [r.iteration for r in a.rows] == [0, 10, 20, 30, 40, 45]
    assert 7.0 <= a.rows[0].u0_estimate <= 8.0
    secs = [r.wall_seconds for r in a.rows]
    assert all(s1 > s0 for s0, s1 in zip(secs, secs[1:]))
    assert a.rows == b.rows
    assert a.final_u0 == a.rows[-1].u0_estimate == a.extra["params"].u0
    assert a.config["baseline"]["iterations"] == 45
    assert a.config["network"]["widths"] == [2, 12, 12, 2]


def test_training_lowers_validation_loss():
    cfg = BaselineConfig(guess_interval=(3.0, 3.0), iterations=300, report_every=300, lr=0.02,
                         batch=32, valid_batch=128, seed=1)
    rep = train_deep_bsde(small_hjb(), cfg)
    assert rep.rows[-1].loss < 0.5 * rep.rows[0].loss


def test_time_budget_stops_early():
    cfg = BaselineConfig(iterations=10**6, report_every=1000, batch=8, valid_batch=8,
                         guess_interval=(1.0, 1.0), time_budget=0.05)
    rep = train_deep_bsde(small_hjb(), cfg, clock=VirtualClock())
    assert rep.extra["iterations_run"] < 10**6
    assert rep.rows[-1].wall_seconds >= 0.05
    assert rep.rows[-1].iteration == rep.extra["iterations_run"]


def test_wall_clock_trace_is_increasing():
    cfg = BaselineConfig(iterations=20, report_every=5, batch=8, valid_batch=8)
    rep = train_deep_bsde(small_hjb(), cfg, clock=WallClock())
    secs = [r.wall_seconds for r in rep.rows]
    assert all(s1 > s0 for s0, s1 in zip(secs, secs[1:]))


def test_nonfinite_loss_aborts(monkeypatch):
    real = bsde_mod.loss_and_grads

    def poisoned(params, problem, paths):
        loss, grads, cache = real(params, problem, paths)
        return float("nan"), grads, cache

    monkeypatch.setattr(bsde_mod, "loss_and_grads", poisoned)
    with pytest.raises(NumericalError, match="iteration 1"):
        train_deep_bsde(small_hjb(), BaselineConfig(iterations=3, batch=4, valid_batch=4))


def test_sweep_single_guess_single_run():
    tab = initial_loss_sweep(small_hjb(), [4.0], runs=1, seed=0, batch=64)
    assert tab.losses.shape == (1, 1)
    assert tab.std[0] == 0.0
    with pytest.raises(ValueError):
        initial_loss_sweep(small_hjb(), [], runs=1, seed=0)


def test_sweep_is_deterministic_and_runs_differ():
    a = initial_loss_sweep(small_hjb(), [1.0, 2.0], runs=3, seed=9, batch=64)
    b = initial_loss_sweep(small_hjb(), [1.0, 2.0], runs=3, seed=9, batch=64)
    assert np.array_equal(a.losses, b.losses)
    assert len(set(a.losses[0])) == 3


def test_zero_driver_sweep_minimizer_near_analytic():
    """f = 0: the mean sweep loss is quadratic with minimizer E[g(X_T)] (the z.dW
    terms have mean zero). E[g] is estimated by plain Monte Carlo."""
    base = small_hjb(d=2, N=3)
    p = type(base)(**{**base.__dict__, "generator": Generator(GEN_ZERO)})
    W = make_rng(123).standard_normal((400000, 2))
    target = float(np.mean(np.log((1 + 2 * (W * W).sum(1)) / 2)))
    grid = np.round(target) + np.arange(-5.0, 6.0)
    tab = initial_loss_sweep(p, grid, runs=3, seed=2, batch=2048)
    assert abs(tab.argmin - target) <= 1.0
    i = int(np.argmin(tab.mean))
    assert np.all(np.diff(tab.mean[i:]) > 0) and np.all(np.diff(tab.mean[:i + 1]) < 0)


def test_sweep_uses_given_network():
    tab = initial_loss_sweep(small_hjb(), [1.0], runs=2, seed=0, batch=32,
                             net=NetConfig(batch_norm=False))
    assert np.all(np.isfinite(tab.losses))
