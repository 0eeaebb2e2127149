#!/usr/bin/env python3
"""Benchmark the compiled kernels against their pure-Python twins.

Runs each hot kernel with identical inputs on both backends, checks the
outputs agree bit-for-bit, and reports timings plus speedups.

    python3 benchmarks/bench_kernels.py [--steps 200000] [--draws 500000]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lattice_gibbs._kernels import compiled, pure  # noqa: E402
from lattice_gibbs._kernels.streams import UniformStream  # noqa: E402


def timed(fn, *args, repeat=1):
    best = None
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best, out


def bench_theta(backend, reps):
    def run():
        acc = 0.0
        for i in range(reps):
            acc += backend.theta_sum(0.8, 1.1, 0.31 * (i % 7), 1e-15)
        return acc
    return run


def bench_draws(backend, us):
    return lambda: backend.dgauss_draw_many(1.7, 0.4, -25, 25, us)


def univariate_args(steps, mwg):
    b = np.array([[1.0, 0.5], [0.0, 1.1]])
    cols = np.ascontiguousarray(b.T)
    norms2 = (cols ** 2).sum(axis=1)
    x0 = np.zeros(2, dtype=np.int64)
    res0 = b @ x0 - np.array([0.3, -0.2])
    return (cols, norms2, 1.0, np.array([0.5, 1.0]), np.zeros(2, dtype=np.int8),
            np.zeros(2, dtype=np.int64), np.zeros(2, dtype=np.int64), 12.0,
            mwg, x0, res0, steps, 0, 1, 0)


def bench_univariate(backend, steps, mwg, seed):
    args = univariate_args(steps, mwg)
    return lambda: backend.run_univariate(*args, UniformStream(seed))


def bench_gk(backend, steps, seed):
    b = np.array([[1.0, 0.5], [0.0, 1.1]])
    q, r = np.linalg.qr(b)
    s = np.sign(np.diag(r))
    q, r = q * s, s[:, None] * r
    cp = q.T @ np.array([0.3, -0.2])
    denoms = np.array([pure.theta_sum(1.0, r[i, i], 0.0, 1e-15) for i in range(2)])
    mode = np.zeros(2, dtype=np.int8)
    lohi = np.zeros(2, dtype=np.int64)

    def run():
        stream = UniformStream(seed)
        z = np.array([0, 1], dtype=np.int64)
        last = None
        for _ in range(steps):
            last = backend.gk_block_draw(r, cp, z, 2, 1.0, 12.0, 100, 1e-15,
                                         mode, lohi, lohi, denoms, stream)
        return last
    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200000,
                    help="chain steps for the run_univariate benchmarks")
    ap.add_argument("--draws", type=int, default=500000,
                    help="1-D draws for the inverse-CDF benchmark")
    args = ap.parse_args()

    if compiled is None:
        print("compiled backend unavailable; build with "
              "`python3 setup.py build_ext --inplace`")
        return 1

    rng = np.random.default_rng(0)
    us = rng.random(args.draws)
    gk_steps = max(args.steps // 10, 1000)
    cases = [
        ("theta_sum x20k", bench_theta(pure, 20000), bench_theta(compiled, 20000)),
        (f"dgauss_draw_many ({args.draws})", bench_draws(pure, us), bench_draws(compiled, us)),
        (f"run_univariate gibbs ({args.steps})",
         bench_univariate(pure, args.steps, False, 1),
         bench_univariate(compiled, args.steps, False, 1)),
        (f"run_univariate mwg ({args.steps})",
         bench_univariate(pure, args.steps, True, 2),
         bench_univariate(compiled, args.steps, True, 2)),
        (f"gk_block_draw ({gk_steps})",
         bench_gk(pure, gk_steps, 3), bench_gk(compiled, gk_steps, 3)),
    ]

    print(f"{'kernel':38s} {'pure [s]':>10s} {'compiled [s]':>13s} {'speedup':>9s}")
    for name, fn_pure, fn_comp in cases:
        tp, out_p = timed(fn_pure)
        tc, out_c = timed(fn_comp)
        _check_same(name, out_p, out_c)
        print(f"{name:38s} {tp:10.3f} {tc:13.3f} {tp / tc:8.1f}x")
    return 0


def _check_same(name, a, b):
    if isinstance(a, dict):
        same = all(np.array_equal(a[k], b[k]) for k in ("samples", "final_x"))
    elif isinstance(a, tuple):
        same = a[0] == b[0] and np.array_equal(a[1], b[1]) and a[2] == b[2]
    elif isinstance(a, np.ndarray):
        same = np.array_equal(a, b)
    else:
        same = a == b
    if not same:
        raise AssertionError(f"backend outputs differ for {name}")


if __name__ == "__main__":
    sys.exit(main())
