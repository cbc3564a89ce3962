"""Command-line front end: ``infproj run | bench | check | parse | synth``."""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __doc__ as _pkg_doc
from .baselines import BmdConfig, SgdConfig, bmd_minmax, sgd_erm
from .config import BENCH_SCHEMA, RUN_SCHEMA, expand_params, load_config
from .data import load_libsvm, split_train_test, subsample, write_libsvm
from .errors import ConfigError, InfProjError, NonFiniteError, ParseError
from .mspg import MspgConfig, mspg
from .problem import VarianceRegProblem
from .stspg import StSpgConfig, st_spg
from .synthetic import make_a9a_like, make_logistic_data
from .trace import Monitor, render_svg, write_json, write_long_csv, write_trace

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def thread_cap() -> int:
    """Worker cap from INFPROJ_THREADS (default: CPU count)."""
    raw = os.environ.get("INFPROJ_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"INFPROJ_THREADS must be a positive integer, got {raw!r}") from None
    if v < 1:
        raise ConfigError(f"INFPROJ_THREADS must be a positive integer, got {raw!r}")
    return v


# --- data and problem --------------------------------------------------------------

def load_data(cfg: dict):
    """Return (train, test) datasets for a config's ``data`` and ``split`` blocks."""
    spec = cfg["data"]
    if "synthetic" in spec:
        if spec["synthetic"] == "a9a_like":
            data = make_a9a_like(spec.get("n", 32561), seed=spec.get("seed", 0))
        else:
            data = make_logistic_data(spec.get("n", 1000), spec.get("d", 20), seed=spec.get("seed", 0))
    else:
        try:
            data = load_libsvm(spec["path"], dim=spec.get("dim"))
        except OSError as exc:
            raise ConfigError(f"cannot read data {spec['path']}: {exc.strerror}") from None
    if "subsample" in spec:
        size = spec["subsample"]
        if isinstance(size, float) and size <= 1:
            size = max(2, int(math.ceil(size * data.n - 1e-9)))
        data = subsample(data, min(int(size), data.n), seed=spec.get("seed", 0))
    if "test_path" in spec:
        test = load_libsvm(spec["test_path"], dim=data.dim)
        if test.dim != data.dim:
            data = data.with_dim(test.dim)
        return data, test
    split = cfg.get("split", {})
    return split_train_test(data, split.get("train_fraction", 0.8), seed=split.get("seed", 0))


def build_problem(train, pcfg: dict | None) -> VarianceRegProblem:
    pcfg = pcfg or {}
    return VarianceRegProblem(train, pcfg.get("lambda", 0.1), pcfg.get("loss", "logistic"),
                              pcfg.get("alpha_trunc"))


# --- solver dispatch ------------------------------------------------------------------

def run_solver(name: str, problem, params: dict, seed: int, log_every: int, test=None,
               dense_trace: bool = False, label: str | None = None):
    """Run one solver; returns (monitor, summary-fragment, dense inner trace or None)."""
    monitor = Monitor(problem, label or name, test_data=test, log_every=log_every)
    try:
        return _dispatch(name, problem, dict(params), seed, log_every, test, dense_trace, monitor)
    except NonFiniteError as exc:
        exc.monitor = monitor  # keeps the partial trace reachable
        raise


def _dispatch(name, problem, p, seed, log_every, test, dense_trace, monitor):
    info: dict = {}
    dense = None
    if name == "st_spg":
        cfg = StSpgConfig(K=p.get("K", 50), gamma=p.get("gamma", 0.2), mu=p.get("mu", 1.0),
                          alpha_samp=p.get("alpha_samp", 1.0), schedule=p.get("schedule", "growing"),
                          mode_x=p.get("mode_x", "smooth"), mode_y=p.get("mode_y", "smooth"),
                          batch_size=p.get("batch_size", 10), full_batch=p.get("full_batch", False),
                          seed=seed, log_every=log_every, snapshot_metrics=False, dense_trace=dense_trace)
        res = st_spg(problem, cfg, monitor=monitor)
        x = res.x_last
        with monitor.clock.paused():
            info = {"tau": res.tau, "x_tau": _point_summary(problem, res.x_tau, test),
                    "x_last": _point_summary(problem, res.x_last, test), "y_last": res.y_last}
        dense = res.dense_trace if dense_trace else None
    elif name == "mspg":
        cfg = MspgConfig(T=p.get("T", 200), c=p.get("c", 0.25), b=p.get("b", 1), batch_cap=p.get("batch_cap"),
                         L_override=p.get("L_override"), D_y=p.get("D_y"), loss_bound=p.get("loss_bound"),
                         seed=seed, log_every=log_every)
        res = mspg(problem, cfg, monitor=monitor)
        x = res.x_last
        with monitor.clock.paused():
            info = {"tau": res.tau, "L": res.L, "eta": res.eta, "full_batch_from": res.full_batch_from,
                    "constants": res.info, "x_tau": _point_summary(problem, res.x_tau, test),
                    "x_last": _point_summary(problem, res.x_last, test)}
    elif name == "bmd":
        rho = p.get("rho", 1.0)
        cfg = BmdConfig(T=p.get("T", 1000), eta_theta=p.get("eta_theta", 1.0), eta_p=p.get("eta_p", 1e-4),
                        rho=rho, batch_size=p.get("batch_size", 10), full_dual=p.get("full_dual", False),
                        seed=seed, log_every=log_every)
        res = bmd_minmax(problem, cfg, monitor=monitor)
        x = res.x
        info = {"rho": rho, "dual_divergence": res.p.divergence(),
                "dual_seconds_per_iter": res.dual_seconds / cfg.T}
    elif name == "sgd_erm":
        cfg = SgdConfig(T=p.get("T", 1000), eta=p.get("eta", 1.0), batch_size=p.get("batch_size", 10),
                        seed=seed, log_every=log_every)
        res = sgd_erm(problem, cfg, monitor=monitor)
        x = res.x
    else:  # schema keeps this unreachable
        raise ConfigError(f"unknown solver {name!r}")
    with monitor.clock.paused():
        info.setdefault("final", _point_summary(problem, x, test))
    return monitor, info, dense


def _point_summary(problem, x, test) -> dict:
    return {"x": np.asarray(x).tolist(), "F": problem.eval_F(x), "grad_norm": float(np.linalg.norm(problem.full_gradient_F(x))),
            "train_error": problem.zero_one_error(x),
            "test_error": problem.zero_one_error(x, test) if test is not None else None}


def _check_solver_params(name: str, params: dict, problem_cfg: dict | None):
    if name == "sgd_erm" and problem_cfg and "lambda" in problem_cfg:
        warnings.warn("sgd_erm optimizes the plain empirical risk; 'lambda' is ignored", UserWarning,
                      stacklevel=3)


def _resolve_params(params: dict, n: int) -> dict:
    combos = expand_params(params or {}, n)
    if len(combos) != 1:
        raise ConfigError("run takes a single parameter setting; use bench for grids")
    return combos[0]


# --- commands -------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config, RUN_SCHEMA)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    log_every = args.log_every or cfg.get("log_every", 1)
    dense = args.dense_trace or cfg.get("dense_trace", False)
    out = args.out or cfg.get("output", {}).get("dir", "out")
    train, test = load_data(cfg)
    problem = build_problem(train, cfg.get("problem"))
    params = _resolve_params(cfg.get("params", {}), train.n)
    _check_solver_params(cfg["solver"], params, cfg.get("problem"))
    os.makedirs(out, exist_ok=True)
    trace_path, timing_path = os.path.join(out, "trace.csv"), os.path.join(out, "timing.csv")
    summary = {"solver": cfg["solver"], "seed": seed, "config": cfg, "params": params,
               "n_train": train.n, "n_test": test.n, "dim": train.dim}
    t0 = time.perf_counter()
    try:
        monitor, info, dense_rows = run_solver(cfg["solver"], problem, params, seed, log_every, test, dense)
    except NonFiniteError as exc:
        partial = getattr(exc, "monitor", None)
        summary.update({"status": "diverged", "error": str(exc)})
        if partial is not None:
            write_trace(partial.records, trace_path, timing_path)
        write_json(summary, os.path.join(out, "summary.json"))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_trace(monitor.records, trace_path, timing_path)
    if dense_rows:
        with open(os.path.join(out, "dense_trace.csv"), "w") as fh:
            fh.write("stage,inner_iter,subproblem_objective\n")
            for k, t, v in dense_rows:
                fh.write(f"{k},{t},{v!r}\n")
    last = monitor.records[-1]
    summary.update({"status": "ok", "wall_seconds": time.perf_counter() - t0, "cpu_seconds": last.cpu_seconds,
                    **info})
    write_json(summary, os.path.join(out, "summary.json"))
    fin = info["final"]
    print(f"{cfg['solver']}: F={fin['F']:.6g} grad_norm={fin['grad_norm']:.3g} "
          f"train_error={fin['train_error']:.4f} test_error={fin['test_error']:.4f} -> {out}")
    return EXIT_OK


def _bench_job(job):
    label, name, params, problem_cfg, seed, log_every, train, test = job
    problem = build_problem(train, problem_cfg)
    try:
        monitor, info, _ = run_solver(name, problem, params, seed, log_every, test, label=label)
        return label, monitor.records, {"status": "ok", "solver": name, "params": params, **info}
    except InfProjError as exc:
        return label, [], {"status": "failed", "solver": name, "params": params, "error": str(exc)}


def cmd_bench(args) -> int:
    cfg = load_config(args.config, BENCH_SCHEMA)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    log_every = args.log_every or cfg.get("log_every", 1)
    out = args.out or cfg.get("output", {}).get("dir", "out")
    train, test = load_data(cfg)
    jobs, seen = [], {}
    for entry in cfg["solvers"]:
        problem_cfg = {**cfg.get("problem", {}), **entry.get("problem", {})}
        _check_solver_params(entry["solver"], entry.get("params", {}), entry.get("problem"))
        combos = expand_params(entry.get("params", {}), train.n)
        base = entry.get("label", entry["solver"])
        for params in combos:
            label = base if len(combos) == 1 else base + "[" + ",".join(
                f"{k}={params[k]:g}" for k in sorted(params)
                if isinstance(params[k], float) and params[k] != entry.get("params", {}).get(k)) + "]"
            seen[label] = seen.get(label, 0) + 1
            if seen[label] > 1:
                label = f"{label}#{seen[label]}"
            jobs.append((label, entry["solver"], params, problem_cfg, seed, log_every, train, test))

    parallel = args.parallel or cfg.get("parallel", False)
    if parallel and thread_cap() > 1:
        warnings.warn("parallel bench: cpu_seconds are not comparable across solvers", UserWarning)
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(thread_cap(), len(jobs))) as ex:
            results = list(ex.map(_bench_job, jobs))
    else:
        results = [_bench_job(j) for j in jobs]

    os.makedirs(out, exist_ok=True)
    runs = {label: recs for label, recs, _ in results if recs}
    write_long_csv(runs, os.path.join(out, "bench.csv"))
    with open(os.path.join(out, "bench.svg"), "w") as fh:
        fh.write(render_svg(runs, log_x=cfg.get("log_x", False)))
    failed = [label for label, _, s in results if s["status"] != "ok"]
    write_json({"seed": seed, "config": cfg, "runs": {label: s for label, _, s in results},
                "partial": bool(failed), "failed": failed}, os.path.join(out, "summary.json"))
    for label, recs, s in results:
        if s["status"] == "ok":
            fin = s["final"]
            print(f"{label}: train_error={fin['train_error']:.4f} test_error={fin['test_error']:.4f} "
                  f"cpu={recs[-1].cpu_seconds:.3f}s")
        else:
            print(f"{label}: FAILED {s['error']}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_check(args) -> int:
    from .checks import SUITES, run_suites

    suites = args.suite or ["all"]
    unknown = [s for s in suites if s != "all" and s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {unknown}; choose from {['all', *SUITES]}")
    results = run_suites(suites, fault=args.inject_fault)
    failures = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.suite}.{r.name} [{r.operation}] {r.detail}")
    if args.json:
        print(json.dumps({"failures": [r.as_dict() for r in failures], "checked": len(results)}))
    return EXIT_FAIL if failures else EXIT_OK


def cmd_parse(args) -> int:
    try:
        data = load_libsvm(args.path, dim=args.dim)
    except ParseError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"{args.path}: {exc.strerror}", file=sys.stderr)
        return EXIT_FAIL
    nnz = int(data.X.nnz)
    print(f"samples={data.n} dim={data.dim} nnz={nnz} density={nnz / max(1, data.n * data.dim):.6f} "
          f"positive_fraction={float(np.mean(data.labels > 0)):.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    data = make_a9a_like(args.n, seed=args.seed)
    with open(args.path, "w") as fh:
        write_libsvm(data, fh)
    print(f"wrote {data.n} samples, {data.dim} features to {args.path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infproj", description=_pkg_doc)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dense=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (default: config output.dir or ./out)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--log-every", type=int, help="logging interval in stages/iterations")
        if dense:
            p.add_argument("--dense-trace", action="store_true", help="also store inner SPG objectives")

    p = sub.add_parser("run", help="run one solver and write trace.csv, timing.csv, summary.json")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run several solvers on the same split; write bench.csv and bench.svg")
    common(p, dense=False)
    p.add_argument("--parallel", action="store_true",
                   help="run solvers in worker processes (capped by INFPROJ_THREADS)")
    p.set_defaults(func=cmd_bench, dense_trace=False)

    p = sub.add_parser("check", help="run numeric diagnostics suites")
    p.add_argument("--suite", action="append", help="gradients, lemma1, projection, invariants or all")
    p.add_argument("--json", action="store_true", help="print a JSON failure list")
    p.add_argument("--inject-fault", choices=["wrong-sign-gradient"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("parse", help="sanity-check a libsvm file")
    p.add_argument("path")
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("synth", help="write a census-style surrogate dataset in libsvm format")
    p.add_argument("path")
    p.add_argument("--n", type=int, default=32561)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfProjError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
