"""Pure-NumPy twins of the compiled tag kernels.

Selected automatically when the extension is unavailable (or when
``OPOHERALD_PURE=1``).  Results are bit-identical to the compiled versions;
only throughput differs.  See ``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import numpy as np

_CHUNK_PAIR_BUDGET = 8_000_000


def correlate_into(starts: np.ndarray, stops: np.ndarray,
                   min_delay: int, bin_width: int,
                   counts: np.ndarray) -> None:
    """Vectorized multi-stop correlation accumulation.

    Works in chunks of starts; each chunk expands its in-window stop ranges
    with a gather and feeds one ``bincount``.
    """
    n_bins = counts.shape[0]
    span = bin_width * n_bins
    lo_all = np.searchsorted(stops, starts + min_delay, side="left")
    hi_all = np.searchsorted(stops, starts + (min_delay + span), side="left")
    per_start = hi_all - lo_all

    pos = 0
    n_starts = starts.shape[0]
    while pos < n_starts:
        end = pos
        budget = 0
        while end < n_starts and (budget == 0 or budget + per_start[end] <= _CHUNK_PAIR_BUDGET):
            budget += per_start[end]
            end += 1
        lo, hi = lo_all[pos:end], hi_all[pos:end]
        sizes = hi - lo
        total = int(sizes.sum())
        if total:
            # flat gather indices: for each start k, lo[k]..hi[k]-1
            offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
            flat = np.arange(total, dtype=np.int64)
            flat += np.repeat(lo - offsets, sizes)
            delays = stops[flat] - np.repeat(starts[pos:end] + min_delay, sizes)
            counts += np.bincount(delays // bin_width, minlength=n_bins).astype(np.int64)
        pos = end


def dead_time_keep(times: np.ndarray, dead: int, keep: np.ndarray) -> int:
    """Iterative relaxation of the sequential dead-time scan.

    Starts from "keep everything", then repeatedly drops tags closer than
    ``dead`` to their currently-kept predecessor.  Converges in one pass at
    rates where dead time is a perturbation; degrades gracefully otherwise.
    """
    n = times.shape[0]
    keep[:n] = 1
    if n == 0 or dead <= 0:
        return n
    idx = np.arange(n)
    while True:
        kept_idx = idx[keep[:n].astype(bool)]
        if kept_idx.size <= 1:
            break
        gaps = np.diff(times[kept_idx])
        close_idx = np.nonzero(gaps < dead)[0]
        if close_idx.size == 0:
            break
        # drop the first offender of each close run; survivors re-checked next pass
        run_start = np.concatenate(([True], np.diff(close_idx) > 1))
        keep[kept_idx[1:][close_idx[run_start]]] = 0
    return int(keep[:n].sum())
