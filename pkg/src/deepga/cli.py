"""``deepga`` command line: solve, landscape, bench, oracle.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import kernels
from .bsde import initial_loss_sweep, train_deep_bsde
from .config import ConfigError, load_config, resolve
from .ga import run_deep_ga
from .oracles import hjb_exact_mc, reference_for
from .problems import HjbParams
from .report import RunReport, emit_csv, make_clock, write_json
from .rollout import work_flops

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numerical failures here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"scale factors must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deepga", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (("solve", "train one solver and trace it"),
                            ("landscape", "loss at fixed initial guesses, no training"),
                            ("bench", "deep-GA and deep-BSDE on one problem, paired traces"),
                            ("oracle", "reference value with its standard error, as JSON")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=_u64, required=name in ("solve", "bench"))
        p.add_argument("--out", help="output directory")
        p.add_argument("--scale-dim", type=_positive)
        p.add_argument("--scale-iters", type=_positive)
        p.add_argument("--scale-samples", type=_positive)
        p.add_argument("--clock", choices=("virtual", "wall"),
                       help="virtual (deterministic modelled seconds) or wall")
        if name == "solve":
            p.add_argument("--method", choices=("deep-bsde", "deep-ga"))
    return parser


def _attach_reference(report: RunReport, problem):
    ref, source = reference_for(problem)
    report.reference, report.reference_source = ref, source


def _solve_one(cfg, problem, method, clock_kind, time_budget=None, guess_interval=None):
    clock = make_clock(clock_kind)
    if method == "deep-ga":
        report = run_deep_ga(problem, cfg.deep_ga, cfg.network, clock)
    else:
        bsde = cfg.deep_bsde
        changes = {}
        if time_budget is not None:
            changes["time_budget"] = time_budget
        if guess_interval is not None:
            changes["guess_interval"] = tuple(guess_interval)
        if changes:
            bsde = type(bsde)(**{**bsde.__dict__, **changes})
        report = train_deep_bsde(problem, bsde, cfg.network, clock)
    report.config = {**cfg.echo(), "method": method, "clock_detail": clock.describe(),
                     "kernel_backend": kernels.backend_name(),
                     "time_units": "seconds (modelled when clock is virtual)"}
    _attach_reference(report, problem)
    return report


def _write_generations(report: RunReport, path: Path):
    gens = report.extra.get("generations", [])
    if not gens:
        return
    n_pop = len(gens[0].population_means)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "wall_seconds", *[f"mean_u0_pop{k}" for k in range(n_pop)],
                    "combined_mean_u0", "mean_fitness", "best_fitness", "valid_loss"])
        for g in gens:
            w.writerow([g.generation, "%.10g" % g.seconds,
                        *["%.10g" % m for m in g.population_means],
                        "%.10g" % g.combined_mean, "%.10g" % g.mean_fitness,
                        "%.10g" % g.best_fitness, "%.10g" % g.valid_loss])


def cmd_solve(cfg, out: Path):
    method = cfg.method
    problem = cfg.build_problem()
    report = _solve_one(cfg, problem, method, cfg.clock)
    emit_csv(report, out / "trace.csv")
    _write_generations(report, out / "generations.csv")
    write_json(report.summary(), out / "summary.json")
    print(json.dumps({"method": method, "final_u0": report.final_u0,
                      "reference": report.reference, "abs_pct_error": report.abs_pct_error,
                      "total_seconds": report.total_seconds, "out": str(out)}))


def first_time_below(report: RunReport, threshold: float):
    for r in report.rows:
        if r.loss < threshold:
            return r.wall_seconds
    return None


def cmd_bench(cfg, out: Path):
    problem = cfg.build_problem()
    ga = _solve_one(cfg, problem, "deep-ga", cfg.clock)
    budget = ga.total_seconds if cfg.bench.get("equal_time", True) else None
    bsde = _solve_one(cfg, problem, "deep-bsde", cfg.clock, time_budget=budget,
                      guess_interval=cfg.bench.get("bsde_guess_interval"))
    emit_csv(ga, out / "deep-ga.csv")
    _write_generations(ga, out / "deep-ga-generations.csv")
    emit_csv(bsde, out / "deep-bsde.csv")
    bsde_final_loss = bsde.rows[-1].loss
    comparison = {
        "time_budget": budget,
        "deep_ga": {"final_u0": ga.final_u0, "final_loss": ga.rows[-1].loss,
                    "abs_pct_error": ga.abs_pct_error, "total_seconds": ga.total_seconds},
        "deep_bsde": {"final_u0": bsde.final_u0, "final_loss": bsde_final_loss,
                      "abs_pct_error": bsde.abs_pct_error, "total_seconds": bsde.total_seconds,
                      "iterations_run": bsde.extra["iterations_run"]},
        "deep_ga_seconds_to_beat_deep_bsde_final_loss": first_time_below(ga, bsde_final_loss),
        "reference": ga.reference,
        "reference_source": ga.reference_source,
        "config": ga.config,
    }
    write_json(comparison, out / "summary.json")
    print(json.dumps({k: comparison[k] for k in ("deep_ga", "deep_bsde")}))


def cmd_landscape(cfg, out: Path):
    problem = cfg.build_problem()
    land = cfg.landscape
    clock = make_clock(cfg.clock)
    clock.start()
    table = initial_loss_sweep(problem, land["guesses"], land["runs"],
                               cfg.seed if cfg.seed is not None else 0, land["batch"], cfg.network)
    report = RunReport(config={**cfg.echo(), "method": "landscape"})
    per_guess = work_flops(problem, cfg.network, land["batch"]) * land["runs"] / len(land["guesses"])
    for i, (g, _, mean, _) in enumerate(table.rows()):
        clock.charge(per_guess)
        report.add_row("landscape", i, clock.now(), g, mean)
    report.final_u0 = table.argmin
    report.total_seconds = clock.now()
    emit_csv(report, out / "trace.csv")
    with open(out / "landscape.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["guess", *[f"run{r + 1}" for r in range(land["runs"])], "mean", "std"])
        for g, losses, mean, std in table.rows():
            w.writerow(["%.10g" % g, *["%.10g" % v for v in losses], "%.10g" % mean, "%.10g" % std])
    write_json({"config": report.config, "argmin": table.argmin,
                "mean": table.mean, "std": table.std}, out / "summary.json")
    print(json.dumps({"argmin": table.argmin, "out": str(out)}))


def cmd_oracle(cfg, out: Path | None):
    problem = cfg.build_problem()
    if cfg.problem["name"] == "hjb":
        res = hjb_exact_mc(HjbParams(lam=cfg.problem["lam"]), problem.dim, problem.horizon,
                           problem.x0, cfg.oracle["n_samples"], cfg.seed or 0)
        payload = {"value": res.value, "std_error": res.std_error, "n_samples": res.n_samples,
                   "method": res.method}
    else:
        ref, source = reference_for(problem)
        if ref is None:
            raise ConfigError("no oracle for this BS configuration; use d=1 with "
                              "gamma_h == gamma_l or a published setting")
        payload = {"value": ref, "std_error": 0.0, "n_samples": 0, "method": source}
    payload["problem"] = cfg.problem
    if out is not None:
        write_json(payload, out / "oracle.json")
    print(json.dumps(payload))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        raw = load_config(args.config) if args.config else {}
        method = getattr(args, "method", None)
        if args.command == "landscape":
            method = "landscape"
        elif args.command == "oracle":
            method = "oracle"
        cfg = resolve(raw, method=method, seed=args.seed, out=args.out, clock=args.clock,
                      scale_dim=args.scale_dim, scale_iters=args.scale_iters,
                      scale_samples=args.scale_samples)
        out = Path(cfg.out)
        if args.command != "oracle" or args.out:
            out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            if cfg.method not in ("deep-bsde", "deep-ga"):
                raise ConfigError(f"solve needs method deep-bsde or deep-ga, got {cfg.method!r}")
            cmd_solve(cfg, out)
        elif args.command == "bench":
            cmd_bench(cfg, out)
        elif args.command == "landscape":
            cmd_landscape(cfg, out)
        else:
            cmd_oracle(cfg, out if args.out else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
