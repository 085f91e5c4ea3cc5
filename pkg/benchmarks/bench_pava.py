"""Compare the compiled and pure-Python isotonic projection backends.

Times the row-wise PAVA projection alone and a complete batch of quantile
predictions (which projects one row per query), checks that both backends
agree, and prints a small table.

    python benchmarks/bench_pava.py [--rows 20000] [--m 20] [--repeat 5]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from frechet_vcm import _accel
from frechet_vcm.model_selection import fit_method
from frechet_vcm.simulation import DGPConfig, gen_example


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_projection(rows, m, repeat, rng):
    # sorted values plus noise: many short violating blocks, as in predictions
    raw = np.sort(rng.standard_normal((rows, m)), axis=1) + 0.3 * rng.standard_normal((rows, m))
    out = {}
    res = {}
    for name, fn in (("python", _accel.pava_rows_python), ("compiled", _accel.pava_rows_compiled)):
        if fn is None:
            continue
        res[name] = fn(raw)
        out[name] = best_time(lambda: fn(raw), repeat)
    if len(res) == 2:
        diff = float(np.max(np.abs(res["python"] - res["compiled"])))
        if diff > 1e-12:
            raise SystemExit(f"backends disagree on the projection (max diff {diff:.3g})")
    return out


def bench_prediction(n_test, repeat):
    data = gen_example(DGPConfig.for_example(1, n_train=200, n_test=n_test, gamma2=3, gamma3=3, seed=11))
    model = fit_method("vfr", data.train, 0.2)
    out = {}
    res = {}
    saved = _accel.pava_rows
    try:
        for name, fn in (("python", _accel.pava_rows_python), ("compiled", _accel.pava_rows_compiled)):
            if fn is None:
                continue
            _accel.pava_rows = fn
            res[name] = model.predict_batch(data.test.X, data.test.U)
            out[name] = best_time(lambda: model.predict_batch(data.test.X, data.test.U), repeat)
    finally:
        _accel.pava_rows = saved
    if len(res) == 2 and not np.array_equal(res["python"], res["compiled"]):
        diff = float(np.max(np.abs(res["python"] - res["compiled"])))
        if diff > 1e-12:
            raise SystemExit(f"backends disagree on predictions (max diff {diff:.3g})")
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--m", type=int, default=20)
    ap.add_argument("--n-test", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _accel.COMPILED_AVAILABLE:
        print("compiled extension not available; timing the Python backend only", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    proj = bench_projection(args.rows, args.m, args.repeat, rng)
    pred = bench_prediction(args.n_test, args.repeat)
    print(f"{'task':<34}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for label, t in ((f"pava {args.rows}x{args.m}", proj), (f"vfr predict, {args.n_test} queries", pred)):
        py, cc = t.get("python", np.nan), t.get("compiled", np.nan)
        print(f"{label:<34}{py:>12.4f}{cc:>14.4f}{py / cc:>10.1f}")


if __name__ == "__main__":
    main()
