"""Benchmark the compiled spectral-sum kernel against the numpy fallback.

Run from the repository root::

    python benchmarks/bench_spectral.py [--points N] [--freqs M] [--repeat R]

The spectral sum z_i = sum_j [a_j cos(2 pi k_j . x_i) + b_j sin(...)] is the
hot loop of the random-field generator; both implementations must agree to
machine precision.
"""

import argparse
import time

import numpy as np

from geofv._kernels import BACKEND, spectral_sum, spectral_sum_numpy


def bench(fn, points, freqs, a, b, repeat):
    fn(points[:16], freqs, a, b)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(points, freqs, a, b)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=65536)
    ap.add_argument("--freqs", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    points = rng.random((args.points, 3))
    freqs = rng.normal(size=(args.freqs, 3))
    a = rng.normal(size=args.freqs)
    b = rng.normal(size=args.freqs)

    print(f"compiled backend available: {BACKEND == 'cython'}")
    print(f"{args.points} points x {args.freqs} frequencies, "
          f"best of {args.repeat}")

    t_np, z_np = bench(spectral_sum_numpy, points, freqs, a, b, args.repeat)
    print(f"  numpy fallback : {t_np * 1e3:9.2f} ms")
    if BACKEND == "cython":
        t_cy, z_cy = bench(spectral_sum, points, freqs, a, b, args.repeat)
        err = np.max(np.abs(z_cy - z_np)) / np.max(np.abs(z_np))
        print(f"  cython kernel  : {t_cy * 1e3:9.2f} ms "
              f"({t_np / t_cy:.2f}x vs numpy)")
        print(f"  max relative difference: {err:.3e}")


if __name__ == "__main__":
    main()
