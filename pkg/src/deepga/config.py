"""JSON run configuration: problem selector, method settings, desk-scale multipliers.

A config is one JSON object. Missing sections fall back to per-problem presets
(the budgets used in the published experiments); command-line flags override
file values. ``RunConfig.echo()`` is the fully resolved document that every
report carries.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, fields

from .bsde import BaselineConfig
from .ga import GaConfig
from .network import NetConfig
from .problems import BsParams, HjbParams, ProblemSpec, make_bs_problem, make_hjb_problem

METHODS = ("deep-bsde", "deep-ga", "oracle", "landscape")
CLOCKS = ("virtual", "wall")


class ConfigError(ValueError):
    pass


PROBLEM_DEFAULTS = {
    "bs": {"dim": 100, "n_steps": 40, "horizon": 1.0, "x0": 100.0, **asdict(BsParams())},
    "hjb": {"dim": 100, "n_steps": 20, "horizon": 1.0, "x0": 0.0, **asdict(HjbParams())},
}

# Method budgets per problem. Both BS baseline budgets are kept: 10000 iterations
# for accuracy runs, 6000 for the initial-guess study (select with "budget").
PRESETS = {
    "bs": {
        "deep_bsde": {"guess_interval": [40.0, 50.0], "iterations": 10000, "lr": 0.008},
        "deep_bsde_budgets": {"accuracy": 10000, "initial-guess-study": 6000},
        "deep_ga": {"generations": 15, "p": 100, "lr": 0.008, "u0_min": 0.0, "u0_max": 100.0},
        "landscape": {"guesses": [float(g) for g in range(0, 101, 10)], "runs": 5, "batch": 4096},
    },
    "hjb": {
        "deep_bsde": {"guess_interval": [7.0, 8.0], "iterations": 40000, "lr": 0.01},
        "deep_bsde_budgets": {"accuracy": 40000},
        "deep_ga": {"generations": 20, "p": 1000, "lr": 0.01, "u0_min": 0.0, "u0_max": 10.0},
        "landscape": {"guesses": [float(g) for g in range(0, 11)], "runs": 5, "batch": 4096},
    },
}

TOP_KEYS = {"problem", "method", "seed", "out", "clock", "scale", "network", "deep_bsde",
            "deep_ga", "landscape", "oracle", "bench"}


def _check_keys(section: dict, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _field_names(cls):
    return [f.name for f in fields(cls)]


def _scaled(n, factor, minimum=1):
    return max(minimum, int(round(n * factor)))


@dataclass
class RunConfig:
    problem: dict
    method: str
    seed: int | None
    out: str
    clock: str
    scale: dict
    network: NetConfig
    deep_bsde: BaselineConfig
    deep_ga: GaConfig
    landscape: dict
    oracle: dict
    bench: dict

    def build_problem(self) -> ProblemSpec:
        return build_problem(self.problem)

    def echo(self) -> dict:
        return {
            "problem": dict(self.problem),
            "method": self.method,
            "seed": self.seed,
            "out": self.out,
            "clock": self.clock,
            "scale": dict(self.scale),
            "network": self.network.resolved(self.problem["dim"]),
            "deep_bsde": asdict(self.deep_bsde),
            "deep_ga": asdict(self.deep_ga),
            "landscape": dict(self.landscape),
            "oracle": dict(self.oracle),
            "bench": dict(self.bench),
        }


def build_problem(pcfg: dict) -> ProblemSpec:
    pcfg = dict(pcfg)
    name = pcfg.pop("name")
    common = {k: pcfg.pop(k) for k in ("dim", "n_steps", "horizon", "x0")}
    try:
        if name == "bs":
            return make_bs_problem(BsParams(**pcfg), d=common["dim"], T=common["horizon"],
                                   N=common["n_steps"], x0=common["x0"])
        return make_hjb_problem(HjbParams(**pcfg), d=common["dim"], T=common["horizon"],
                                N=common["n_steps"], x0=common["x0"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def resolve(raw: dict | None = None, *, method=None, seed=None, out=None, clock=None,
            scale_dim=None, scale_iters=None, scale_samples=None) -> RunConfig:
    """Merge presets, file values and flag overrides; apply the scale multipliers.

    File and flag multipliers multiply, so ``--scale-iters 0.5`` on a file that
    already says 0.1 runs at 0.05.
    """
    raw = copy.deepcopy(raw or {})
    _check_keys(raw, TOP_KEYS, "config")

    pcfg = raw.get("problem", {"name": "bs"})
    if isinstance(pcfg, str):
        pcfg = {"name": pcfg}
    name = pcfg.get("name")
    if name not in PROBLEM_DEFAULTS:
        raise ConfigError(f"unknown problem {name!r}; expected one of {sorted(PROBLEM_DEFAULTS)}")
    _check_keys(pcfg, ["name", *PROBLEM_DEFAULTS[name]], f"problem ({name})")
    problem = {"name": name, **PROBLEM_DEFAULTS[name]}
    problem.update({k: v for k, v in pcfg.items() if k != "name"})

    method = method or raw.get("method", "deep-ga")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {list(METHODS)}")

    clock = clock or raw.get("clock", "virtual")
    if clock not in CLOCKS:
        raise ConfigError(f"unknown clock {clock!r}; expected one of {list(CLOCKS)}")

    scale = {"dim": 1.0, "iters": 1.0, "samples": 1.0}
    file_scale = raw.get("scale", {})
    _check_keys(file_scale, scale, "scale")
    for key, flag in (("dim", scale_dim), ("iters", scale_iters), ("samples", scale_samples)):
        factor = float(file_scale.get(key, 1.0)) * (1.0 if flag is None else float(flag))
        if not factor > 0:
            raise ConfigError(f"scale factor for {key} must be positive, got {factor}")
        scale[key] = factor
    problem["dim"] = _scaled(problem["dim"], scale["dim"])

    if seed is None:
        seed = raw.get("seed")
    if seed is not None:
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")

    preset = PRESETS[name]
    net_raw = raw.get("network", {})
    _check_keys(net_raw, _field_names(NetConfig), "network")

    bsde_raw = {**preset["deep_bsde"], **raw.get("deep_bsde", {})}
    budget = bsde_raw.pop("budget", None)
    if budget is not None:
        if budget not in preset["deep_bsde_budgets"]:
            raise ConfigError(f"unknown budget {budget!r}; expected one of {sorted(preset['deep_bsde_budgets'])}")
        bsde_raw["iterations"] = preset["deep_bsde_budgets"][budget]
    _check_keys(bsde_raw, _field_names(BaselineConfig), "deep_bsde")
    bsde_raw["iterations"] = _scaled(bsde_raw["iterations"], scale["iters"])
    for key in ("batch", "valid_batch"):
        bsde_raw[key] = _scaled(bsde_raw.get(key, getattr(BaselineConfig, key)), scale["samples"])
    if seed is not None:
        bsde_raw["seed"] = seed

    ga_raw = {**preset["deep_ga"], **raw.get("deep_ga", {})}
    _check_keys(ga_raw, _field_names(GaConfig), "deep_ga")
    ga_raw["p"] = _scaled(ga_raw["p"], scale["iters"], minimum=0)
    for key in ("batch", "valid_batch"):
        ga_raw[key] = _scaled(ga_raw.get(key, getattr(GaConfig, key)), scale["samples"])
    if seed is not None:
        ga_raw["seed"] = seed

    land = {**preset["landscape"], **raw.get("landscape", {})}
    _check_keys(land, ["guesses", "runs", "batch"], "landscape")
    land["batch"] = _scaled(land["batch"], scale["samples"])
    land["guesses"] = [float(g) for g in land["guesses"]]

    orc = {"n_samples": 10**7, **raw.get("oracle", {})}
    _check_keys(orc, ["n_samples"], "oracle")
    orc["n_samples"] = _scaled(orc["n_samples"], scale["samples"])

    bench = {"equal_time": True, **raw.get("bench", {})}
    _check_keys(bench, ["equal_time", "bsde_guess_interval"], "bench")

    try:
        net = NetConfig(**net_raw)
        bsde = BaselineConfig(**{**bsde_raw, "guess_interval": tuple(bsde_raw["guess_interval"])})
        ga = GaConfig(**{**ga_raw, "alphas": tuple(ga_raw.get("alphas", GaConfig.alphas))})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    build_problem(problem)  # validate early

    return RunConfig(problem=problem, method=method, seed=seed,
                     out=out or raw.get("out", "runs"), clock=clock, scale=scale,
                     network=net, deep_bsde=bsde, deep_ga=ga, landscape=land, oracle=orc,
                     bench=bench)
