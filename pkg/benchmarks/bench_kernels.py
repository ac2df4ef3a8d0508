"""Benchmark the compiled tag kernels against the pure-NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--n-tags 10000000] [--n-bins 10000]
"""

import argparse
import time

import numpy as np

from opoherald import _tagfallback
from opoherald.rng import stream_rng

try:
    from opoherald import _tagkernels
except ImportError:
    _tagkernels = None

PS = 10**12


def make_streams(n_tags: int, duration_s: float):
    rng = stream_rng(1, "bench")
    half = n_tags // 2
    starts = np.sort(rng.integers(0, int(duration_s * PS), half)).astype(np.int64)
    stops = np.sort(rng.integers(0, int(duration_s * PS), n_tags - half)).astype(np.int64)
    return starts, stops


def time_correlate(impl, starts, stops, bin_width, n_bins, repeats=3):
    best = float("inf")
    counts = np.zeros(n_bins, dtype=np.int64)
    for _ in range(repeats):
        counts[:] = 0
        t0 = time.perf_counter()
        impl.correlate_into(starts, stops, -(n_bins // 2) * bin_width,
                            bin_width, counts)
        best = min(best, time.perf_counter() - t0)
    return best, counts


def time_dead_time(impl, times, dead, repeats=3):
    best = float("inf")
    keep = np.empty(times.size, dtype=np.uint8)
    for _ in range(repeats):
        t0 = time.perf_counter()
        kept = impl.dead_time_keep(times, dead, keep)
        best = min(best, time.perf_counter() - t0)
    return best, kept


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n-tags", type=int, default=10_000_000)
    parser.add_argument("--n-bins", type=int, default=10_000)
    parser.add_argument("--bin-width-ps", type=int, default=100)
    parser.add_argument("--duration-s", type=float, default=5.0)
    args = parser.parse_args()

    starts, stops = make_streams(args.n_tags, args.duration_s)
    impls = [("python", _tagfallback)]
    if _tagkernels is not None:
        impls.insert(0, ("cython", _tagkernels))

    print(f"correlate: {args.n_tags:.2e} tags -> {args.n_bins} bins of "
          f"{args.bin_width_ps} ps over {args.duration_s} s")
    results = {}
    for name, impl in impls:
        dt, counts = time_correlate(impl, starts, stops, args.bin_width_ps,
                                    args.n_bins)
        results[name] = counts
        print(f"  {name:>7}: {dt:8.3f} s   ({args.n_tags / dt:.3g} tags/s, "
              f"{counts.sum():.3g} pairs binned)")
    if len(results) == 2 and not np.array_equal(results["cython"], results["python"]):
        raise SystemExit("backend mismatch in correlate results")

    merged = np.sort(np.concatenate([starts, stops]))
    print(f"dead time: {merged.size:.2e} tags, 50 ns")
    kept = {}
    for name, impl in impls:
        dt, n_kept = time_dead_time(impl, merged, 50_000)
        kept[name] = n_kept
        print(f"  {name:>7}: {dt:8.3f} s   ({merged.size / dt:.3g} tags/s, "
              f"{n_kept} kept)")
    if len(kept) == 2 and kept["cython"] != kept["python"]:
        raise SystemExit("backend mismatch in dead-time results")


if __name__ == "__main__":
    main()
