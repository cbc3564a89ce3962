"""Compare the compiled and numpy kernel backends on census-style data.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5] [--json out.json]

Each kernel is timed with the best of ``--repeat`` runs; the speedup column is
python time over cython time.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from infproj.data import subsample
from infproj.kernels import LOGISTIC, available_backends
from infproj.spg import step_sizes
from infproj.synthetic import make_a9a_like


def cases(data, rng):
    args = (data.indptr, data.indices, data.data, data.labels)
    n, d = data.n, data.dim
    x = rng.normal(scale=0.1, size=d)
    all_rows = np.arange(n, dtype=np.int64)
    batch = rng.integers(0, n, 10).astype(np.int64)
    w = np.full(10, 0.1)
    T = 200
    etas = step_sizes(0.2, T)
    draws_g = rng.integers(0, n, (T, 10)).astype(np.int64)
    draws_l = rng.integers(0, n, (T, 10)).astype(np.int64)
    out = np.zeros(d)
    return {
        "batch_losses[full]": lambda k: k.batch_losses(*args, all_rows, x, LOGISTIC, 0.0),
        "accumulate_grad[10]": lambda k: k.accumulate_grad(*args, batch, x, LOGISTIC, 0.0, 1.0, 0.0, w, out),
        "spg_x_stage[T=200,b=10]": lambda k: k.spg_x_stage(*args, LOGISTIC, 0.0, 0.1, x, x, 0.5, 0.2, etas,
                                                          draws_g, draws_l, -np.inf, np.inf),
        "spg_y_stage[T=200,b=10]": lambda k: k.spg_y_stage(*args, LOGISTIC, 0.0, 0.1, x, 0.5, 1.0, etas,
                                                          draws_g, 0.0, np.inf),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback is timed", file=sys.stderr)
    data = subsample(make_a9a_like(seed=0), args.n, seed=0)
    table = {}
    for name, fn in cases(data, np.random.default_rng(0)).items():
        row = {}
        for bname, mod in backends.items():
            number = 1 if bname == "python" else 20
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            row[bname] = best
        table[name] = row

    print(f"{'kernel':28s}{'python (ms)':>14s}{'cython (ms)':>14s}{'speedup':>10s}")
    for name, row in table.items():
        py, cy = row["python"], row.get("cython")
        cy_s = f"{cy * 1e3:14.3f}" if cy else f"{'-':>14s}"
        sp = f"{py / cy:10.1f}" if cy else f"{'-':>10s}"
        print(f"{name:28s}{py * 1e3:14.3f}{cy_s}{sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"n": args.n, "seconds": table}, fh, indent=2)


if __name__ == "__main__":
    main()
