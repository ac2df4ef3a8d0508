"""Parity between the compiled kernels and the pure-NumPy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opoherald import _tagfallback
from opoherald import kernels

try:
    from opoherald import _tagkernels
except ImportError:
    _tagkernels = None

needs_extension = pytest.mark.skipif(_tagkernels is None,
                                     reason="compiled extension not built")


def _correlate(impl, starts, stops, min_delay, bin_width, n_bins):
    counts = np.zeros(n_bins, dtype=np.int64)
    impl.correlate_into(np.asarray(starts, np.int64), np.asarray(stops, np.int64),
                        min_delay, bin_width, counts)
    return counts


def _brute_force(starts, stops, min_delay, bin_width, n_bins):
    counts = np.zeros(n_bins, dtype=np.int64)
    for s in starts:
        for t in stops:
            d = t - s
            if min_delay <= d < min_delay + bin_width * n_bins:
                counts[(d - min_delay) // bin_width] += 1
    return counts


sorted_times = st.lists(st.integers(min_value=0, max_value=5000),
                        min_size=0, max_size=60).map(sorted)


class TestCorrelate:
    @given(sorted_times, sorted_times,
           st.integers(min_value=-300, max_value=100),
           st.integers(min_value=1, max_value=80),
           st.integers(min_value=1, max_value=40))
    @settings(max_examples=200, deadline=None)
    def test_fallback_matches_brute_force(self, starts, stops, min_delay,
                                          bin_width, n_bins):
        expected = _brute_force(starts, stops, min_delay, bin_width, n_bins)
        got = _correlate(_tagfallback, starts, stops, min_delay, bin_width, n_bins)
        np.testing.assert_array_equal(got, expected)

    @needs_extension
    @given(sorted_times, sorted_times,
           st.integers(min_value=-300, max_value=100),
           st.integers(min_value=1, max_value=80),
           st.integers(min_value=1, max_value=40))
    @settings(max_examples=200, deadline=None)
    def test_backends_agree(self, starts, stops, min_delay, bin_width, n_bins):
        a = _correlate(_tagkernels, starts, stops, min_delay, bin_width, n_bins)
        b = _correlate(_tagfallback, starts, stops, min_delay, bin_width, n_bins)
        np.testing.assert_array_equal(a, b)

    @needs_extension
    def test_backends_agree_large_random(self):
        rng = np.random.default_rng(7)
        starts = np.sort(rng.integers(0, 10**9, 20_000)).astype(np.int64)
        stops = np.sort(rng.integers(0, 10**9, 20_000)).astype(np.int64)
        a = _correlate(_tagkernels, starts, stops, -50_000, 1000, 100)
        b = _correlate(_tagfallback, starts, stops, -50_000, 1000, 100)
        np.testing.assert_array_equal(a, b)
        assert a.sum() > 0


def _dead_time(impl, times, dead):
    times = np.asarray(times, np.int64)
    keep = np.empty(times.size, dtype=np.uint8)
    kept = impl.dead_time_keep(times, dead, keep)
    assert kept == int(keep.sum())
    return keep.astype(bool)


def _dead_time_reference(times, dead):
    keep = []
    last = None
    for t in times:
        if last is not None and t - last < dead:
            keep.append(False)
        else:
            keep.append(True)
            last = t
    return np.array(keep, dtype=bool)


class TestDeadTime:
    @given(sorted_times, st.integers(min_value=0, max_value=500))
    @settings(max_examples=200, deadline=None)
    def test_fallback_matches_reference(self, times, dead):
        got = _dead_time(_tagfallback, times, dead)
        np.testing.assert_array_equal(got, _dead_time_reference(times, dead))

    @needs_extension
    @given(sorted_times, st.integers(min_value=0, max_value=500))
    @settings(max_examples=200, deadline=None)
    def test_backends_agree(self, times, dead):
        a = _dead_time(_tagkernels, times, dead)
        b = _dead_time(_tagfallback, times, dead)
        np.testing.assert_array_equal(a, b)


def test_active_backend_exposed():
    assert kernels.BACKEND in ("cython", "python")
