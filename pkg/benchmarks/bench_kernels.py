#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times the two hot paths on realistic workloads: the declustering scan
over a multi-year minute grid (the gap sweep repeats it ~30 times) and
the excess negative log-likelihood at optimizer-call granularity.

Run from the repository root:

    python benchmarks/bench_kernels.py [--minutes N] [--excesses N]

Requires the numba backend; unset FLAREVT_DISABLE_NUMBA to compare both.
"""

import argparse
import time

import numpy as np

from flarevt import _kernels


def best_of(fn, repeats, *args):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    if seconds < 1.0:
        return f"{seconds * 1e3:8.2f} ms"
    return f"{seconds:8.2f} s "


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--minutes", type=int, default=15_768_000,
                        help="series length for the declustering scan "
                             "(default: 30 years)")
    parser.add_argument("--excesses", type=int, default=10_000,
                        help="sample size for the likelihood kernel")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba backend unavailable (disabled or not installed); "
                         "nothing to compare")

    rng = np.random.default_rng(42)

    print(f"declustering scan: {args.minutes:,} minutes, ~1% exceedances")
    times = np.arange(args.minutes, dtype=np.int64)
    flux = rng.uniform(0.0, 1.0, args.minutes)
    flux[rng.random(args.minutes) < 0.02] = np.nan
    scan_args = (times, flux, 0.99, 15)

    _kernels.decluster_scan_numba(*scan_args)  # compile before timing
    t_numba = best_of(_kernels.decluster_scan_numba, args.repeats, *scan_args)
    t_numpy = best_of(_kernels.decluster_scan_numpy, args.repeats, *scan_args)
    clusters = _kernels.decluster_scan_numba(*scan_args)[0].size
    print(f"  numba  {fmt(t_numba)}   ({clusters} clusters)")
    print(f"  numpy  {fmt(t_numpy)}   speedup x{t_numpy / t_numba:.1f}")

    print(f"\nexcess negative log-likelihood: {args.excesses:,} values, "
          "100 evaluations (one optimizer run's worth)")
    y = rng.uniform(0.0, 3.0, args.excesses)

    def run_nll(kernel):
        for _ in range(100):
            kernel(y, 1.3, 0.25)

    _kernels.gpd_nll_numba(y, 1.3, 0.25)
    t_numba = best_of(run_nll, args.repeats, _kernels.gpd_nll_numba)
    t_numpy = best_of(run_nll, args.repeats, _kernels.gpd_nll_numpy)
    print(f"  numba  {fmt(t_numba)}")
    print(f"  numpy  {fmt(t_numpy)}   speedup x{t_numpy / t_numba:.1f}")

    a = _kernels.gpd_nll_numba(y, 1.3, 0.25)
    b = _kernels.gpd_nll_numpy(y, 1.3, 0.25)
    print(f"\nagreement: |numba - numpy| = {abs(a - b):.3e} "
          f"({abs(a - b) / abs(b):.2e} relative)")


if __name__ == "__main__":
    main()
