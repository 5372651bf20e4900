"""Deep-GA: a genetic algorithm over the scalar u0, alternating with Adam on the subnets.

Each generation runs the phases in strict order:

1. expand every population (selection + averaging crossover, bounded mutation,
   four mean-shifted candidates);
2. set theta_u0 to the mean of all candidates of all populations;
3. run ``p`` Adam iterations on every weight (the trained theta_u0 is thrown away);
4. draw one fresh sample batch;
5. score each candidate by the loss with theta_u0 overridden, weights frozen;
6. keep the ``m`` fittest of each population.

The populations never exchange candidates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .bsde import validation_loss
from .network import NetConfig, adam_step, init_params, update_running_stats
from .paths import PathBatch, sample_paths, substreams
from .problems import ProblemSpec
from .report import RunReport, VirtualClock
from .rollout import NumericalError, candidate_losses, loss_and_grads, work_flops


@dataclass(frozen=True)
class GaConfig:
    m: int = 10
    generations: int = 10
    p_c: float = 0.8
    p_m: float = 0.4
    u0_min: float = 0.0
    u0_max: float = 100.0
    p: int = 100
    n_populations: int = 3
    alphas: tuple = (1.0, -1.0, 2.0, -2.0)
    lr: float = 0.008
    batch: int = 64
    valid_batch: int = 256
    seed: int = 0
    report_every: int | None = None  # extra trace rows inside the Adam phase

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.u0_min < self.u0_max:
            raise ValueError(f"need u0_min < u0_max, got [{self.u0_min}, {self.u0_max}]")
        for name in ("p_c", "p_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.m < 2:
            raise ValueError(f"population size m must be >= 2, got {self.m}")
        if self.generations < 1 or self.n_populations < 1:
            raise ValueError("generations and n_populations must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if len(self.alphas) != 4:
            raise ValueError(f"need four alphas, got {len(self.alphas)}")
        for name in ("batch", "valid_batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.report_every is not None and self.report_every < 1:
            raise ValueError("report_every must be >= 1 when given")

    @property
    def span(self) -> float:
        return self.u0_max - self.u0_min


@dataclass
class Population:
    candidates: np.ndarray
    fitness: np.ndarray | None = None

    def __post_init__(self):
        self.candidates = np.asarray(self.candidates, dtype=float).reshape(-1)
        if self.fitness is not None:
            self.fitness = np.asarray(self.fitness, dtype=float).reshape(-1)
            if self.fitness.shape != self.candidates.shape:
                raise ValueError("fitness must parallel the candidates")
            if not np.all(np.isfinite(self.fitness)) or np.any(self.fitness < 0):
                raise ValueError("fitness values must be finite and non-negative")

    def __len__(self):
        return self.candidates.size

    @property
    def mean(self) -> float:
        return float(self.candidates.mean())


def generate_population(cfg: GaConfig) -> Population:
    """Evenly spaced u0_min + i/m * span for i = 1..m (u0_min itself is excluded)."""
    i = np.arange(1, cfg.m + 1)
    return Population(cfg.u0_min + i / cfg.m * cfg.span)


def crossover(v1: float, v2: float) -> float:
    return 0.5 * (v1 + v2)


def mutate(u: float, eps: float, cfg: GaConfig) -> float:
    if not -1.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [-1, 1], got {eps}")
    return u + eps * cfg.span / 100.0


def mean_mutations(pop: Population, cfg: GaConfig) -> np.ndarray:
    return pop.mean + np.asarray(cfg.alphas) * cfg.span / 100.0


def expand_population(pop: Population, cfg: GaConfig, rng) -> Population:
    """Append offspring to a survivor population of size m.

    Per round i: with probability p_c, two distinct survivors are averaged; with
    probability p_m, survivor i is mutated by eps ~ U[-1, 1]. The four
    mean-shifted candidates use the mean before expansion.
    """
    if len(pop) != cfg.m:
        raise ValueError(f"expected {cfg.m} survivors, got {len(pop)}")
    if pop.fitness is not None:
        raise ValueError("expand a population after clearing its fitness")
    u = pop.candidates
    shifted = mean_mutations(pop, cfg)
    children = []
    for i in range(cfg.m):
        if rng.random() < cfg.p_c:
            a, b = rng.choice(cfg.m, size=2, replace=False)
            children.append(crossover(u[a], u[b]))
        if rng.random() < cfg.p_m:
            children.append(mutate(u[i], rng.uniform(-1.0, 1.0), cfg))
    return Population(np.concatenate([u, np.asarray(children, dtype=float), shifted]))


def evaluate_fitness(pop: Population, params, problem: ProblemSpec, sample: PathBatch) -> Population:
    """Loss of each candidate on one shared batch; ``params`` is only read."""
    fit = candidate_losses(params, problem, sample, pop.candidates)
    if not np.all(np.isfinite(fit)):
        raise NumericalError("non-finite fitness")
    return Population(pop.candidates.copy(), fit)


def sort_and_eliminate(pop: Population, m: int) -> Population:
    """Stable ascending sort by fitness, truncated to the m fittest."""
    if pop.fitness is None:
        raise ValueError("population has no fitness to sort by")
    order = np.argsort(pop.fitness, kind="stable")[:m]
    return Population(pop.candidates[order], pop.fitness[order])


def _all_candidates(pops) -> np.ndarray:
    return np.concatenate([p.candidates for p in pops])


@dataclass
class GenerationRecord:
    generation: int
    seconds: float
    population_means: list
    combined_mean: float
    mean_fitness: float
    best_fitness: float
    valid_loss: float
    sizes_before_elimination: list = field(default_factory=list)


def run_deep_ga(problem: ProblemSpec, cfg: GaConfig, net: NetConfig | None = None,
                clock=None) -> RunReport:
    """Run the GA/Adam alternation; the final u0 is the mean over all survivors.

    Trace rows: ``init`` (generation 0), optional ``train`` rows inside the Adam
    phase, and one ``generation`` row per generation whose loss is the held-out
    validation loss at the combined mean.
    """
    net = net or NetConfig()
    clock = clock or VirtualClock()
    rngs = substreams(cfg.seed, ["init", "train", "valid", "ga", "fitness"])
    pops = [generate_population(cfg) for _ in range(cfg.n_populations)]
    u_start = float(_all_candidates(pops).mean())
    params = init_params(problem.dim, problem.n_steps, net, rngs["init"], (u_start, u_start))
    report = RunReport(config={"method": "deep-ga", "problem": problem.describe(),
                               "ga": asdict(cfg), "network": net.resolved(problem.dim),
                               "clock": clock.describe()})
    step_flops = work_flops(problem, net, cfg.batch, backward=True) + 10.0 * params.n_parameters()
    valid_flops = work_flops(problem, net, cfg.valid_batch)
    records = []

    clock.start()
    valid = sample_paths(problem, rngs["valid"], cfg.valid_batch)
    clock.charge(valid_flops)
    report.add_row("init", 0, clock.now(), u_start, validation_loss(params, problem, valid, u_start))

    total_iters = 0
    for gen in range(1, cfg.generations + 1):
        pops = [expand_population(p, cfg, rngs["ga"]) for p in pops]
        sizes = [len(p) for p in pops]
        params.u0 = float(_all_candidates(pops).mean())

        for _ in range(cfg.p):
            paths = sample_paths(problem, rngs["train"], cfg.batch)
            loss, grads, cache = loss_and_grads(params, problem, paths)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss in generation {gen}")
            if cache["subnet"] is not None:
                update_running_stats(params, cache["subnet"])
            adam_step(params, grads, cfg.lr)
            total_iters += 1
            clock.charge(step_flops)
            if cfg.report_every and total_iters % cfg.report_every == 0:
                report.add_row("train", total_iters, clock.now(), params.u0, loss)

        sample = sample_paths(problem, rngs["fitness"], cfg.valid_batch)
        everything = _all_candidates(pops)
        fit = candidate_losses(params, problem, sample, everything)
        clock.charge(work_flops(problem, net, cfg.valid_batch, n_candidates=everything.size))
        scored, lo = [], 0
        for k, pop in enumerate(pops):
            f = fit[lo:lo + len(pop)]
            lo += len(pop)
            if not np.all(np.isfinite(f)):
                raise NumericalError(f"non-finite fitness in generation {gen}, population {k}")
            scored.append(Population(pop.candidates, f))
        survivors = [sort_and_eliminate(p, cfg.m) for p in scored]
        pops = [Population(p.candidates) for p in survivors]

        u_hat = float(_all_candidates(pops).mean())
        clock.charge(valid_flops)
        vloss = validation_loss(params, problem, valid, u_hat)
        if not np.isfinite(vloss):
            raise NumericalError(f"non-finite validation loss in generation {gen}")
        now = clock.now()
        report.add_row("generation", gen, now, u_hat, vloss)
        fits = np.concatenate([p.fitness for p in survivors])
        records.append(GenerationRecord(
            generation=gen, seconds=report.rows[-1].wall_seconds,
            population_means=[p.mean for p in pops], combined_mean=u_hat,
            mean_fitness=float(fits.mean()), best_fitness=float(fits.min()),
            valid_loss=vloss, sizes_before_elimination=sizes))

    report.final_u0 = float(_all_candidates(pops).mean())
    params.u0 = report.final_u0
    report.total_seconds = clock.now()
    report.extra["generations"] = records
    report.extra["adam_iterations"] = total_iters
    report.extra["params"] = params
    report.extra["populations"] = [p.candidates.tolist() for p in pops]
    return report
