#!/usr/bin/env python3
"""Benchmark the compiled stencil kernel against the pure-NumPy fallback.

Times one leapfrog sweep over grids of increasing size for each backend (and
several worker counts for the compiled kernel) and prints node updates per
second.  Usage:

    python benchmarks/bench_stencil.py [--steps 50]
"""

import argparse
import time

import numpy as np

from kelvinwave.stencil import HAS_COMPILED, leapfrog_interior

CASES = [
    ("1d", (1_000_000,)),
    ("2d", (512, 512)),
    ("2d", (1448, 1448)),
    ("3d", (128, 128, 128)),
]


def time_backend(shape, backend, workers, steps):
    rng = np.random.default_rng(0)
    v_prev = rng.standard_normal(shape)
    v_curr = rng.standard_normal(shape)
    out = np.zeros(shape)
    lam2 = 0.4
    leapfrog_interior(v_prev, v_curr, out, lam2, backend, workers)  # warm-up
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(steps):
            leapfrog_interior(v_prev, v_curr, out, lam2, backend, workers)
            v_prev, v_curr, out = v_curr, out, v_prev
        best = min(best, (time.perf_counter() - start) / steps)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=50, help="sweeps per timing loop")
    args = parser.parse_args()

    worker_counts = (1, 4) if HAS_COMPILED else ()
    header = f"{'grid':>16} {'nodes':>12} {'numpy':>12}"
    for w in worker_counts:
        header += f" {'compiled@' + str(w):>14}"
    print(header)
    for label, shape in CASES:
        nodes = int(np.prod(shape))
        row = f"{label + str(list(shape)):>16} {nodes:>12,}"
        t_numpy = time_backend(shape, "numpy", 1, args.steps)
        row += f" {nodes / t_numpy / 1e6:>9.0f} M/s"
        for w in worker_counts:
            t_c = time_backend(shape, "compiled", w, args.steps)
            row += f" {nodes / t_c / 1e6:>9.0f} M/s x{t_numpy / t_c:>4.1f}"
        print(row)
    if not HAS_COMPILED:
        print("\ncompiled kernel unavailable; showing the NumPy fallback only")


if __name__ == "__main__":
    main()
