"""Compiled hot loops for time-tag processing.

Two order-coupled scans dominate large analyses: the multi-stop correlation
pass and the non-paralyzable dead-time filter.  Both walk sorted int64
picosecond arrays exactly once.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def correlate_into(const long long[::1] starts, const long long[::1] stops,
                   long long min_delay, long long bin_width,
                   long long[::1] counts):
    """Accumulate multi-stop delay counts into ``counts``.

    Every (start, stop) pair with ``min_delay <= stop - start < min_delay +
    len(counts)*bin_width`` increments the bin of its delay.  Arrays must be
    sorted; complexity is O(n_starts + n_stops + n_pairs).
    """
    cdef Py_ssize_t n_starts = starts.shape[0]
    cdef Py_ssize_t n_stops = stops.shape[0]
    cdef Py_ssize_t n_bins = counts.shape[0]
    cdef long long span = bin_width * n_bins
    cdef Py_ssize_t i, j, j_lo = 0
    cdef long long lo, hi, s

    for i in range(n_starts):
        s = starts[i]
        lo = s + min_delay
        hi = lo + span
        while j_lo < n_stops and stops[j_lo] < lo:
            j_lo += 1
        j = j_lo
        while j < n_stops and stops[j] < hi:
            counts[(stops[j] - lo) // bin_width] += 1
            j += 1


def dead_time_keep(const long long[::1] times, long long dead,
                   cnp.uint8_t[::1] keep):
    """Mark tags surviving a non-paralyzable dead time.

    A tag is dropped when it falls strictly less than ``dead`` after the last
    accepted tag.  Returns the number of survivors.
    """
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i, kept = 0
    cdef long long last = 0
    cdef bint have_last = False

    for i in range(n):
        if have_last and times[i] - last < dead:
            keep[i] = 0
        else:
            keep[i] = 1
            last = times[i]
            have_last = True
            kept += 1
    return kept
