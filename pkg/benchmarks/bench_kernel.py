#!/usr/bin/env python3
"""Benchmark the compiled KF replay kernel against the pure-Python fallback.

The replay kernel dominates runtime in the adaptive loop: every candidate
parameter set re-runs the filter over the measurement window.  Run with

    python benchmarks/bench_kernel.py [--steps 20000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from iwakf.kernels import _pykernel, kf_run, BACKEND
from iwakf.model import augment, discretize_pendulum, shaping_filter


def bench(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=5)
    opts = ap.parse_args()

    system = discretize_pendulum()
    aug = augment(system, shaping_filter("sf1"))
    Q = aug.B_aug @ aug.B_aug.T * 0.05
    rng = np.random.default_rng(0)
    y = rng.normal(size=opts.steps)
    args = (
        aug.A_aug,
        aug.C_aug[0],
        Q,
        0.01,
        np.zeros(aug.n),
        10 * np.eye(aug.n),
        y,
    )

    if BACKEND != "cython":
        print("compiled kernel not available; benchmarking fallback only")
        t_py = bench(_pykernel.kf_run, args, opts.repeats)
        print(f"python : {t_py * 1e3:9.2f} ms  ({opts.steps / t_py:,.0f} steps/s)")
        return

    t_c = bench(kf_run, args, opts.repeats)
    t_py = bench(_pykernel.kf_run, args, opts.repeats)
    print(f"state dim {aug.n}, {opts.steps} steps, best of {opts.repeats}")
    print(f"cython : {t_c * 1e3:9.2f} ms  ({opts.steps / t_c:,.0f} steps/s)")
    print(f"python : {t_py * 1e3:9.2f} ms  ({opts.steps / t_py:,.0f} steps/s)")
    print(f"speedup: {t_py / t_c:.1f}x")


if __name__ == "__main__":
    main()
