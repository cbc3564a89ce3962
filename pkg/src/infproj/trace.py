"""Trace records, CPU clocks, CSV/JSON emission and SVG charts."""
from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

TRACE_VERSION = "infproj-trace v1"
CORE_COLUMNS = ("solver", "stage_or_iter", "objective_F", "grad_norm", "train_error", "test_error")
TIMING_COLUMNS = ("solver", "stage_or_iter", "cpu_seconds")


@dataclass
class TraceRecord:
    solver: str
    stage_or_iter: int
    cpu_seconds: float
    objective_F: float
    grad_norm: float
    train_error: float
    test_error: float
    extras: dict = field(default_factory=dict)


class Stopwatch:
    """Process CPU time and wall time, excluding intervals spent inside ``paused()``."""

    def __init__(self):
        self._cpu0 = time.process_time()
        self._wall0 = time.perf_counter()
        self._cpu_paused = 0.0
        self._wall_paused = 0.0

    @contextlib.contextmanager
    def paused(self):
        c, w = time.process_time(), time.perf_counter()
        try:
            yield
        finally:
            self._cpu_paused += time.process_time() - c
            self._wall_paused += time.perf_counter() - w

    def cpu(self) -> float:
        return time.process_time() - self._cpu0 - self._cpu_paused

    def wall(self) -> float:
        return time.perf_counter() - self._wall0 - self._wall_paused


class Monitor:
    """Evaluates a model at logging points and collects TraceRecords.

    Evaluation runs inside ``clock.paused()`` so that cpu_seconds only counts solver work.
    """

    def __init__(self, problem, solver: str, test_data=None, log_every: int = 1):
        self.problem = problem
        self.solver = solver
        self.test_data = test_data
        self.log_every = max(1, int(log_every))
        self.clock = Stopwatch()
        self.records: list[TraceRecord] = []

    def due(self, step: int) -> bool:
        return step % self.log_every == 0

    def record(self, step: int, x, F=None, grad_norm=None, extras=None) -> TraceRecord:
        with self.clock.paused():
            if F is None:
                F = self.problem.eval_F(x)
            if grad_norm is None:
                grad_norm = float(np.linalg.norm(self.problem.full_gradient_F(x)))
            train = self.problem.zero_one_error(x)
            test = self.problem.zero_one_error(x, self.test_data) if self.test_data is not None else math.nan
            ex = dict(extras or {})
            ex.setdefault("wall_seconds", self.clock.wall())
            rec = TraceRecord(self.solver, int(step), self.clock.cpu(), float(F), float(grad_norm),
                              float(train), float(test), ex)
            self.records.append(rec)
        return rec


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _is_timing_key(k: str) -> bool:
    return k.endswith("_seconds")


def extra_keys(records: Iterable[TraceRecord]) -> list[str]:
    keys = set()
    for r in records:
        keys.update(r.extras)
    return sorted(keys)


def write_trace(records: list[TraceRecord], trace_path, timing_path=None) -> None:
    """Write deterministic columns to ``trace_path`` and clock readings to ``timing_path``.

    Repeated runs with the same seed produce byte-identical trace files; all timing
    values (cpu_seconds and ``*_seconds`` extras) live in the timing file.
    """
    keys = extra_keys(records)
    det = [k for k in keys if not _is_timing_key(k)]
    tim = [k for k in keys if _is_timing_key(k)]
    with open(trace_path, "w", newline="") as fh:
        fh.write(f"# {TRACE_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CORE_COLUMNS) + [f"extra.{k}" for k in det])
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in CORE_COLUMNS] + [_fmt(r.extras.get(k, "")) for k in det])
    if timing_path is not None:
        with open(timing_path, "w", newline="") as fh:
            fh.write(f"# {TRACE_VERSION} timing\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(TIMING_COLUMNS) + [f"extra.{k}" for k in tim])
            for r in records:
                w.writerow([_fmt(r.solver), _fmt(r.stage_or_iter), _fmt(r.cpu_seconds)]
                           + [_fmt(r.extras.get(k, "")) for k in tim])


def _parse_val(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _read_rows(path):
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(f"# {TRACE_VERSION}"):
            raise ValueError(f"{path}: missing or unsupported trace header {first.strip()!r}")
        return list(csv.DictReader(fh))


def read_trace(trace_path, timing_path=None) -> list[TraceRecord]:
    rows = _read_rows(trace_path)
    timing = {}
    if timing_path is not None and os.path.exists(timing_path):
        for t in _read_rows(timing_path):
            timing[(t["solver"], int(t["stage_or_iter"]))] = t
    out = []
    for row in rows:
        key = (row["solver"], int(row["stage_or_iter"]))
        t = timing.get(key, {})
        extras = {k[6:]: _parse_val(v) for k, v in row.items() if k.startswith("extra.") and v != ""}
        extras.update({k[6:]: _parse_val(v) for k, v in t.items() if k.startswith("extra.") and v != ""})
        out.append(TraceRecord(
            solver=row["solver"], stage_or_iter=int(row["stage_or_iter"]),
            cpu_seconds=float(t["cpu_seconds"]) if t else math.nan,
            objective_F=float(row["objective_F"]), grad_norm=float(row["grad_norm"]),
            train_error=float(row["train_error"]), test_error=float(row["test_error"]), extras=extras))
    return out


LONG_COLUMNS = ("label", "solver", "stage_or_iter", "cpu_seconds", "objective_F", "grad_norm",
                "train_error", "test_error")


def write_long_csv(runs: dict[str, list[TraceRecord]], path) -> None:
    """Long-format comparison table: one row per (run label, logging event), timing inline."""
    keys = sorted({k for recs in runs.values() for k in extra_keys(recs)})
    with open(path, "w", newline="") as fh:
        fh.write(f"# {TRACE_VERSION} long\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(LONG_COLUMNS) + [f"extra.{k}" for k in keys])
        for label, recs in runs.items():
            for r in recs:
                w.writerow([label] + [_fmt(getattr(r, c)) for c in LONG_COLUMNS[1:]]
                           + [_fmt(r.extras.get(k, "")) for k in keys])


def read_long_csv(path) -> dict[str, list[TraceRecord]]:
    runs: dict[str, list[TraceRecord]] = {}
    for row in _read_rows(path):
        extras = {k[6:]: _parse_val(v) for k, v in row.items() if k.startswith("extra.") and v != ""}
        rec = TraceRecord(row["solver"], int(row["stage_or_iter"]), float(row["cpu_seconds"]),
                          float(row["objective_F"]), float(row["grad_norm"]), float(row["train_error"]),
                          float(row["test_error"]), extras)
        runs.setdefault(row["label"], []).append(rec)
    return runs


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --- SVG ---------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(runs: dict[str, list[TraceRecord]], log_x: bool = False, width: int = 900, height: int = 360) -> str:
    """Train and test error against CPU seconds, one polyline per run, as a standalone SVG."""
    panels = (("train_error", "training error"), ("test_error", "testing error"))
    pw, ph = (width - 60) // 2, height - 90
    pts = [(r.cpu_seconds, getattr(r, a)) for recs in runs.values() for r in recs for a, _ in panels]
    pts = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y) and (x > 0 or not log_x)]
    if pts:
        xs = [math.log10(x) if log_x else x for x, _ in pts]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = 0.0, max(y for _, y in pts)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    for p, (attr, title) in enumerate(panels):
        ox, oy = 50 + p * (pw + 20), 30

        def sx(x):
            v = math.log10(x) if log_x else x
            return ox + (v - x_lo) / (x_hi - x_lo) * pw

        def sy(y):
            return oy + ph - (y - y_lo) / (y_hi - y_lo) * ph

        out.write(f'<rect x="{ox}" y="{oy}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>\n')
        out.write(f'<text x="{ox + pw / 2:.1f}" y="{oy - 10}" text-anchor="middle">{title}</text>\n')
        for t in _ticks(x_lo, x_hi):
            x = ox + (t - x_lo) / (x_hi - x_lo) * pw
            lab = f"1e{t:.1f}" if log_x else f"{t:.3g}"
            out.write(f'<text x="{x:.1f}" y="{oy + ph + 14}" text-anchor="middle">{lab}</text>\n')
        for t in _ticks(y_lo, y_hi):
            y = oy + ph - (t - y_lo) / (y_hi - y_lo) * ph
            out.write(f'<text x="{ox - 4}" y="{y + 4:.1f}" text-anchor="end">{t:.3f}</text>\n')
        out.write(f'<text x="{ox + pw / 2:.1f}" y="{oy + ph + 30}" text-anchor="middle">cpu time (s)</text>\n')
        for i, (label, recs) in enumerate(runs.items()):
            coords = [(sx(r.cpu_seconds), sy(getattr(r, attr))) for r in recs
                      if math.isfinite(r.cpu_seconds) and math.isfinite(getattr(r, attr))
                      and (r.cpu_seconds > 0 or not log_x)]
            if not coords:
                continue
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.write(f'<polyline fill="none" stroke="{_PALETTE[i % len(_PALETTE)]}" stroke-width="1.5" '
                      f'points="{path}"/>\n')
    for i, label in enumerate(runs):
        y = height - 22
        x = 50 + i * 150
        color = _PALETTE[i % len(_PALETTE)]
        out.write(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>\n')
        out.write(f'<text x="{x + 25}" y="{y + 4}">{_escape(label)}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
