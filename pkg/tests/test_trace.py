import math

import numpy as np
import pytest

from infproj.problem import VarianceRegProblem
from infproj.synthetic import make_logistic_data
from infproj.trace import (Monitor, Stopwatch, TraceRecord, read_long_csv, read_trace, render_svg,
                           write_json, write_long_csv, write_trace)


def _records():
    return [TraceRecord("st_spg", k, 0.01 * k, 1.0 / k, 0.5 / k, 0.3, math.nan,
                        {"y": 0.25 * k, "inner_x": 3 * k, "wall_seconds": 0.02 * k}) for k in range(1, 6)]


def test_round_trip(tmp_path):
    recs = _records()
    write_trace(recs, tmp_path / "trace.csv", tmp_path / "timing.csv")
    back = read_trace(tmp_path / "trace.csv", tmp_path / "timing.csv")
    assert len(back) == 5
    for a, b in zip(recs, back):
        assert (a.solver, a.stage_or_iter, a.cpu_seconds, a.objective_F, a.grad_norm) == \
               (b.solver, b.stage_or_iter, b.cpu_seconds, b.objective_F, b.grad_norm)
        assert math.isnan(b.test_error)
        assert b.extras == a.extras


def test_timing_columns_split(tmp_path):
    write_trace(_records(), tmp_path / "trace.csv", tmp_path / "timing.csv")
    trace = (tmp_path / "trace.csv").read_text()
    timing = (tmp_path / "timing.csv").read_text()
    assert "seconds" not in trace
    assert "extra.wall_seconds" in timing.splitlines()[1]
    assert trace.splitlines()[1].startswith("solver,stage_or_iter,objective_F")


def test_trace_without_timing_file(tmp_path):
    write_trace(_records(), tmp_path / "t.csv")
    back = read_trace(tmp_path / "t.csv")
    assert all(math.isnan(r.cpu_seconds) for r in back)


def test_bad_header(tmp_path):
    (tmp_path / "x.csv").write_text("solver,stage_or_iter\n")
    with pytest.raises(ValueError, match="header"):
        read_trace(tmp_path / "x.csv")


def test_long_csv_round_trip(tmp_path):
    runs = {"a": _records(), "b": _records()[:2]}
    write_long_csv(runs, tmp_path / "bench.csv")
    back = read_long_csv(tmp_path / "bench.csv")
    assert list(back) == ["a", "b"] and len(back["b"]) == 2
    assert back["a"][3].cpu_seconds == pytest.approx(0.04)


def test_svg_deterministic_and_escaped():
    runs = {"<x> & y": _records()}
    a = render_svg(runs, log_x=True)
    assert a == render_svg(runs, log_x=True)
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert "&lt;x&gt; &amp; y" in a and a.count("<polyline") == 1  # test_error is NaN
    assert "<polyline" not in render_svg({"empty": []})


def test_write_json_numpy(tmp_path):
    write_json({"x": np.arange(3), "v": np.float64(0.5)}, tmp_path / "s.json")
    assert '"v": 0.5' in (tmp_path / "s.json").read_text()


def test_stopwatch_excludes_paused():
    sw = Stopwatch()
    with sw.paused():
        sum(i * i for i in range(300_000))
    assert sw.cpu() < 0.01


def test_monitor_records_errors():
    prob = VarianceRegProblem(make_logistic_data(40, 3, seed=1), 0.5)
    mon = Monitor(prob, "x", test_data=prob.data, log_every=3)
    assert mon.due(6) and not mon.due(4)
    rec = mon.record(3, np.ones(3), extras={"y": 1.0})
    assert rec.train_error == rec.test_error == prob.zero_one_error(np.ones(3))
    assert rec.objective_F == pytest.approx(prob.eval_F(np.ones(3)))
    assert "wall_seconds" in rec.extras
