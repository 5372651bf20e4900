"""Deep-BSDE baseline: a random initial guess for u0, then joint Adam training.

Validation uses one held-out batch per run, normalized with its own batch
statistics; running statistics only move during training steps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .network import NetConfig, adam_step, init_params, update_running_stats
from .paths import sample_paths, substreams
from .problems import ProblemSpec
from .report import RunReport, VirtualClock
from .rollout import NumericalError, candidate_losses, loss_and_grads, work_flops


@dataclass(frozen=True)
class BaselineConfig:
    guess_interval: tuple = (40.0, 50.0)
    iterations: int = 10000
    lr: float = 0.008
    batch: int = 64
    valid_batch: int = 256
    seed: int = 0
    report_every: int = 100
    time_budget: float | None = None  # stop once the clock passes this many seconds

    def __post_init__(self):
        a, b = self.guess_interval
        object.__setattr__(self, "guess_interval", (float(a), float(b)))
        if a > b:
            raise ValueError(f"guess interval [{a}, {b}] is empty")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("batch", "valid_batch", "report_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError("time_budget must be positive when given")


def validation_loss(params, problem, paths, u0=None) -> float:
    u0 = params.u0 if u0 is None else u0
    return float(candidate_losses(params, problem, paths, [u0])[0])


def train_deep_bsde(problem: ProblemSpec, cfg: BaselineConfig, net: NetConfig | None = None,
                    clock=None) -> RunReport:
    """Train all weights jointly; trace rows every ``report_every`` iterations.

    The trained ``SolverParams`` are left in ``report.extra['params']``.
    """
    net = net or NetConfig()
    clock = clock or VirtualClock()
    rngs = substreams(cfg.seed, ["init", "train", "valid"])
    params = init_params(problem.dim, problem.n_steps, net, rngs["init"], cfg.guess_interval)
    report = RunReport(config={"method": "deep-bsde", "problem": problem.describe(),
                               "baseline": asdict(cfg), "network": net.resolved(problem.dim),
                               "clock": clock.describe()})
    step_flops = work_flops(problem, net, cfg.batch, backward=True) + 10.0 * params.n_parameters()
    valid_flops = work_flops(problem, net, cfg.valid_batch)

    clock.start()
    valid = sample_paths(problem, rngs["valid"], cfg.valid_batch)
    clock.charge(valid_flops)
    report.add_row("deep-bsde", 0, clock.now(), params.u0, validation_loss(params, problem, valid))

    it = 0
    for it in range(1, cfg.iterations + 1):
        paths = sample_paths(problem, rngs["train"], cfg.batch)
        loss, grads, cache = loss_and_grads(params, problem, paths)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at iteration {it} (u0={params.u0:.6g})")
        if cache["subnet"] is not None:
            update_running_stats(params, cache["subnet"])
        adam_step(params, grads, cfg.lr)
        clock.charge(step_flops)
        out_of_time = cfg.time_budget is not None and clock.now() >= cfg.time_budget
        if it % cfg.report_every == 0 or it == cfg.iterations or out_of_time:
            clock.charge(valid_flops)
            vloss = validation_loss(params, problem, valid)
            if not np.isfinite(vloss):
                raise NumericalError(f"non-finite validation loss at iteration {it}")
            report.add_row("deep-bsde", it, clock.now(), params.u0, vloss)
        if out_of_time:
            break

    report.final_u0 = params.u0
    report.total_seconds = clock.now()
    report.extra["iterations_run"] = it
    report.extra["params"] = params
    return report


@dataclass
class LandscapeTable:
    guesses: np.ndarray   # (G,)
    losses: np.ndarray    # (G, runs)

    @property
    def mean(self) -> np.ndarray:
        return self.losses.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        # population convention (ddof=0)
        return self.losses.std(axis=1)

    @property
    def argmin(self) -> float:
        return float(self.guesses[int(np.argmin(self.mean))])

    def rows(self):
        for g, row, m, s in zip(self.guesses, self.losses, self.mean, self.std):
            yield float(g), [float(v) for v in row], float(m), float(s)


def initial_loss_sweep(problem: ProblemSpec, guesses, runs: int, seed: int,
                       batch: int = 4096, net: NetConfig | None = None) -> LandscapeTable:
    """Loss at each guess of u0 with untrained weights, for ``runs`` independent draws.

    Within one run every guess shares the same weights and sample, so the
    guesses are compared on equal footing; runs use disjoint substreams.
    """
    guesses = np.asarray(guesses, dtype=float).reshape(-1)
    if guesses.size == 0:
        raise ValueError("need at least one guess")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    net = net or NetConfig()
    losses = np.empty((guesses.size, runs))
    for r, ss in enumerate(np.random.SeedSequence(int(seed)).spawn(runs)):
        init_ss, sample_ss = ss.spawn(2)
        params = init_params(problem.dim, problem.n_steps, net,
                             np.random.Generator(np.random.Philox(init_ss)), (0.0, 0.0))
        paths = sample_paths(problem, np.random.Generator(np.random.Philox(sample_ss)), batch)
        losses[:, r] = candidate_losses(params, problem, paths, guesses)
    return LandscapeTable(guesses=guesses, losses=losses)
