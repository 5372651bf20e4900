import json

import pytest

from deepga.cli import main
from deepga.config import ConfigError, resolve
from deepga.report import (
    CSV_COLUMNS, RunReport, TraceRow, VirtualClock, abs_pct_error, emit_csv, read_csv,
    round_row,
)

TINY = ["--scale-dim", "0.03", "--scale-iters", "0.01"]


def test_empty_trace_is_header_only(tmp_path):
    path = emit_csv(RunReport(config={}), tmp_path / "t.csv")
    assert path.read_bytes() == (",".join(CSV_COLUMNS) + "\n").encode("utf-8")
    assert read_csv(path) == []


def test_round_trip_and_format(tmp_path):
    rep = RunReport(config={})
    rep.add_row("deep-bsde", 0, 0.1234567890123, 44.123456789012345, 1e-7 / 3)
    rep.add_row("deep-bsde", 100, 2.5, 45.0, 1234.5)
    path = emit_csv(rep, tmp_path / "t.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[1] == b"0,deep-bsde,0,0.123456789,44.12345679,3.333333333e-08"
    assert read_csv(path) == [round_row(r) for r in rep.rows]


def test_timestamps_forced_strictly_increasing():
    rep = RunReport(config={})
    rep.add_row("a", 0, 1.0, 0.0, 0.0)
    rep.add_row("a", 1, 1.0, 0.0, 0.0)
    assert rep.rows[1].wall_seconds > rep.rows[0].wall_seconds


def test_abs_pct_error():
    assert abs_pct_error(76.95, 77.0) == pytest.approx(100 * 0.05 / 77)
    rep = RunReport(config={}, final_u0=4.6, reference=4.59)
    assert rep.abs_pct_error == pytest.approx(100 * 0.01 / 4.59)
    assert RunReport(config={}, final_u0=1.0).abs_pct_error is None
    with pytest.raises(ValueError):
        abs_pct_error(1.0, 0.0)


def test_virtual_clock():
    c = VirtualClock(1e9)
    with pytest.raises(RuntimeError):
        c.now()
    c.start()
    c.charge(5e8)
    assert c.now() == 0.5


def test_resolve_presets_and_scales():
    cfg = resolve({"problem": "hjb", "scale": {"iters": 0.1, "dim": 0.5}}, scale_iters=0.5, seed=3)
    assert cfg.problem["dim"] == 50 and cfg.problem["n_steps"] == 20
    assert cfg.deep_bsde.iterations == 2000          # 40000 * 0.1 * 0.5
    assert cfg.deep_ga.p == 50                      # 1000 * 0.1 * 0.5
    assert cfg.deep_ga.u0_max == 10.0 and cfg.deep_bsde.guess_interval == (7.0, 8.0)
    assert cfg.deep_bsde.seed == cfg.deep_ga.seed == 3
    echo = cfg.echo()
    assert echo["scale"] == {"dim": 0.5, "iters": 0.05, "samples": 1.0}
    assert echo["network"]["widths"] == [50, 60, 60, 50]
    assert echo["network"]["init_range"] == 0.1
    bs = resolve({"deep_bsde": {"budget": "initial-guess-study"}})
    assert bs.deep_bsde.iterations == 6000 and bs.deep_bsde.lr == 0.008


@pytest.mark.parametrize("raw,kw", [({"method": "sgd"}, {}), ({"problem": "heat"}, {}),
                                    ({"problem": {"name": "bs", "vol": 1}}, {}),
                                    ({"extra": 1}, {}), ({"scale": {"dim": 0}}, {}),
                                    ({"deep_ga": {"m": 1}}, {}), ({}, {"seed": -1}),
                                    ({"problem": {"name": "bs", "v_h": 90.0}}, {})])
def test_resolve_rejects(raw, kw):
    with pytest.raises(ConfigError):
        resolve(raw, **kw)


def _run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_solve_replay_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        code, _ = _run(["solve", "--seed", "11", "--out", str(tmp_path / name), *TINY], capsys)
        assert code == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    assert a.startswith(b"row_index,phase,iteration,wall_seconds,u0_estimate,loss\n")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["config"]["scale"]["dim"] == 0.03
    assert summary["config"]["network"]["hidden_extra"] == 10
    assert (tmp_path / "a" / "generations.csv").exists()


def test_solve_needs_seed_and_known_method(tmp_path, capsys):
    code, err = _run(["solve", "--out", str(tmp_path)], capsys)
    assert code == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"method": "newton"}))
    code, err = _run(["solve", "--seed", "1", "--config", str(bad)], capsys)
    assert code == 1 and "unknown method" in err.err


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": {"name": "bs", "dim": 2, "x0": 1e308},
                               "method": "deep-bsde"}))
    code, out = _run(["solve", "--seed", "1", "--config", str(cfg), "--out", str(tmp_path / "o"),
                      "--scale-iters", "0.001"], capsys)
    assert code == 2 and "numerical failure" in out.err


def test_landscape_single_guess(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": {"name": "hjb", "dim": 3, "n_steps": 4},
                               "landscape": {"guesses": [4.0], "runs": 2, "batch": 64}}))
    code, out = _run(["landscape", "--config", str(cfg), "--seed", "2",
                      "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    rows = read_csv(tmp_path / "o" / "trace.csv")
    assert len(rows) == 1 and rows[0].u0_estimate == 4.0
    lines = (tmp_path / "o" / "landscape.csv").read_text().splitlines()
    assert lines[0] == "guess,run1,run2,mean,std" and len(lines) == 2


def test_bench_pairs_and_replays(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": {"name": "hjb", "dim": 3, "n_steps": 4},
                               "deep_ga": {"generations": 2, "p": 20},
                               "bench": {"bsde_guess_interval": [0.0, 0.0]}}))
    for name in ("a", "b"):
        code, _ = _run(["bench", "--config", str(cfg), "--seed", "5",
                        "--out", str(tmp_path / name)], capsys)
        assert code == 0
    for f in ("deep-ga.csv", "deep-bsde.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    bsde_rows = read_csv(tmp_path / "a" / "deep-bsde.csv")
    assert bsde_rows[0].u0_estimate == 0.0
    assert s["time_budget"] == pytest.approx(s["deep_ga"]["total_seconds"])
    assert s["reference"] is None  # d=3 has no published value
    assert "abs_pct_error" in s["deep_ga"]


def test_oracle_prints_json(capsys):
    code, out = _run(["oracle", "--scale-samples", "0.001"], capsys)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["value"] == 77.00 and payload["std_error"] == 0.0


def test_oracle_hjb(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": {"name": "hjb", "dim": 10}, "oracle": {"n_samples": 5000}}))
    code, out = _run(["oracle", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["std_error"] > 0 and payload["n_samples"] == 5000
    assert json.loads((tmp_path / "oracle.json").read_text())["value"] == payload["value"]


def test_trace_rows_compare_by_value():
    assert TraceRow("a", 1, 0.5, 1.0, 2.0) == TraceRow("a", 1, 0.5, 1.0, 2.0)
