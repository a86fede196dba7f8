#!/usr/bin/env python3
"""Compare the compiled simulation kernel against the vectorized fallback.

Both backends simulate the same unit to both end-of-life conditions; the
timings therefore cover the full cycle loop (voltage solves, event
bisection, ageing updates).

Run: python3 benchmarks/bench_kernels.py [--n-p 4] [--runs 5]
"""

import argparse
import time

import numpy as np

from packlife import kernels
from packlife.ageing import line_from_draw, rho_to_line
from packlife.electrics import CellElectricalParams, OcvCurve
from packlife.fpu import CyclingProtocol, PuConfig, _kernel_args

WARMUP_RUNS = 2


def build_args(n_p, seed=5):
    rng = np.random.default_rng(seed)
    rcl = rho_to_line(124.5)
    params = CellElectricalParams()
    lines = tuple(
        line_from_draw(
            float(rng.normal(0.9939, 0.0028)),
            float(rng.normal(615.85, 68.28)),
            rcl, params.q_nom, params.r_nom,
        )
        for _ in range(n_p)
    )
    cfg = PuConfig(lines=lines, params=params, curve=OcvCurve.default())
    return _kernel_args(cfg, CyclingProtocol())


def time_backend(fn, args, runs):
    for _ in range(WARMUP_RUNS):
        fn(*args, True, True)
    best = float("inf")
    for _ in range(runs):
        t0 = time.perf_counter()
        res = fn(*args, True, True)
        best = min(best, time.perf_counter() - t0)
    return best, res


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-p", type=int, default=4, help="cells per unit")
    parser.add_argument("--runs", type=int, default=5, help="timed repetitions")
    args_ns = parser.parse_args()

    args = build_args(args_ns.n_p)
    print(f"backend in use: {kernels.BACKEND}")
    print(f"unit size n_p = {args_ns.n_p}, best of {args_ns.runs} runs\n")

    t_numpy, res_numpy = time_backend(kernels._simulate_numpy, args, args_ns.runs)
    print(f"numpy fallback : {t_numpy * 1000:9.2f} ms/simulation "
          f"({res_numpy[2]} cycles)")

    if kernels.BACKEND != "numba":
        print("compiled kernel: unavailable (numba not importable or disabled)")
        return

    t_numba, res_numba = time_backend(kernels.simulate_unit, args, args_ns.runs)
    print(f"compiled kernel: {t_numba * 1000:9.2f} ms/simulation "
          f"({res_numba[2]} cycles)")
    print(f"\nspeedup: {t_numpy / t_numba:.0f}x")

    drift = abs(res_numba[8].sum() / res_numpy[8].sum() - 1.0)
    print(f"relative end-of-life EFC difference between backends: {drift:.2e}")


if __name__ == "__main__":
    main()
