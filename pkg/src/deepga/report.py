"""Run reports, trace clocks and the CSV trace format.

Two clocks drive the ``wall_seconds`` column:

* ``WallClock``: monotonic seconds since the first sample was drawn.
* ``VirtualClock``: deterministic modelled seconds, accumulated from the
  floating-point work each phase charges. Replaying a seed gives identical
  bytes, which a real clock can never promise.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("row_index", "phase", "iteration", "wall_seconds", "u0_estimate", "loss")

# Sustained rate of the numpy code paths on one current x86 core, measured on the
# d=100 benchmarks; virtual seconds track wall seconds to within about 50%.
DEFAULT_FLOPS_PER_SECOND = 12.0e9


class WallClock:
    kind = "wall"

    def __init__(self):
        self._t0 = None

    def start(self):
        self._t0 = time.perf_counter()

    def charge(self, flops):
        pass

    def now(self) -> float:
        if self._t0 is None:
            raise RuntimeError("clock not started")
        return time.perf_counter() - self._t0

    def describe(self) -> dict:
        return {"kind": self.kind, "units": "seconds"}


class VirtualClock:
    kind = "virtual"

    def __init__(self, flops_per_second: float = DEFAULT_FLOPS_PER_SECOND):
        if not flops_per_second > 0:
            raise ValueError("flops_per_second must be positive")
        self.flops_per_second = float(flops_per_second)
        self._flops = None

    def start(self):
        self._flops = 0.0

    def charge(self, flops):
        if self._flops is None:
            raise RuntimeError("clock not started")
        self._flops += float(flops)

    def now(self) -> float:
        if self._flops is None:
            raise RuntimeError("clock not started")
        return self._flops / self.flops_per_second

    def describe(self) -> dict:
        return {"kind": self.kind, "units": "modelled seconds",
                "flops_per_second": self.flops_per_second}


def make_clock(kind: str = "wall"):
    if kind == "wall":
        return WallClock()
    if kind == "virtual":
        return VirtualClock()
    raise ValueError(f"unknown clock {kind!r}; expected 'wall' or 'virtual'")


@dataclass
class TraceRow:
    phase: str
    iteration: int
    wall_seconds: float
    u0_estimate: float
    loss: float


@dataclass
class RunReport:
    config: dict
    rows: list = field(default_factory=list)
    final_u0: float | None = None
    reference: float | None = None
    reference_source: str | None = None
    total_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def add_row(self, phase, iteration, seconds, u0, loss):
        # Timestamps must strictly increase; two wall readings can tie.
        if self.rows and seconds <= self.rows[-1].wall_seconds:
            seconds = float(np.nextafter(self.rows[-1].wall_seconds, np.inf))
        self.rows.append(TraceRow(phase, int(iteration), float(seconds), float(u0), float(loss)))

    @property
    def abs_pct_error(self) -> float | None:
        if self.reference is None or self.final_u0 is None:
            return None
        return abs_pct_error(self.final_u0, self.reference)

    def summary(self) -> dict:
        return {
            "config": self.config,
            "final_u0": self.final_u0,
            "reference": self.reference,
            "reference_source": self.reference_source,
            "abs_pct_error": self.abs_pct_error,
            "total_seconds": self.total_seconds,
            "n_rows": len(self.rows),
            "extra": {k: v for k, v in self.extra.items() if k != "params"},
        }


def abs_pct_error(value: float, reference: float) -> float:
    if reference == 0:
        raise ValueError("percentage error undefined for a zero reference")
    return 100.0 * abs(value - reference) / abs(reference)


def _fmt(x: float) -> str:
    return "%.10g" % x


def csv_text(rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, r in enumerate(rows):
        w.writerow([i, r.phase, r.iteration, _fmt(r.wall_seconds), _fmt(r.u0_estimate), _fmt(r.loss)])
    return buf.getvalue()


def emit_csv(report: RunReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(report.rows))
    return path


def read_csv(path) -> list[TraceRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        rows = []
        for i, rec in enumerate(reader):
            if int(rec[0]) != i:
                raise ValueError(f"row_index {rec[0]} out of sequence at line {i + 2}")
            rows.append(TraceRow(rec[1], int(rec[2]), float(rec[3]), float(rec[4]), float(rec[5])))
    return rows


def round_row(r: TraceRow) -> TraceRow:
    """The row as it reads back from CSV (10 significant digits)."""
    return TraceRow(r.phase, r.iteration, float(_fmt(r.wall_seconds)),
                    float(_fmt(r.u0_estimate)), float(_fmt(r.loss)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
