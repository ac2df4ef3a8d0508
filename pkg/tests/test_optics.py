import math

import numpy as np
import pytest
from scipy.integrate import quad

from opoherald import (DetectorSpec, FilterSpec, InputError, Origin,
                       PhotonEvents, apply_dead_time, apply_filter, apply_loss,
                       detect, filter_transmission)
from opoherald.optics import _CASCADE_STAGE_SCALE
from opoherald.rng import stream_rng

PS = 10**12


def _photons(times, detunings=None, origin=Origin.PAIR_SIGNAL):
    times = np.asarray(times, np.int64)
    det = np.zeros(times.size) if detunings is None else np.asarray(detunings, float)
    return PhotonEvents(times, det, np.zeros(times.size, np.int32), origin)


class TestFilterTransmission:
    def test_peak(self):
        f = FilterSpec("single_lorentzian", 0.0, 1.56e9, 0.2)
        assert filter_transmission(f, 0.0) == pytest.approx(0.2)

    def test_fbg_half_maximum(self):
        f = FilterSpec("single_lorentzian", 0.0, 1.56e9, 0.2)
        assert filter_transmission(f, 0.78e9) == pytest.approx(0.10, rel=1e-9)

    def test_fbg_neighbor_mode_leakage(self):
        # transmission one comb spacing away governs herald background
        f = FilterSpec("single_lorentzian", 0.0, 1.56e9, 0.2)
        value = filter_transmission(f, 1.065e9)
        expected = 0.2 * 0.78**2 / (0.78**2 + 1.065**2)
        assert value == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(0.0698, abs=2e-4)

    def test_cascade_fwhm(self):
        f = FilterSpec("cascaded_lorentzian", 0.0, 22e6, 1.0)
        assert filter_transmission(f, 11e6) == pytest.approx(0.5, rel=1e-9)

    def test_cascade_stage_width(self):
        assert _CASCADE_STAGE_SCALE == pytest.approx(1.0 / math.sqrt(math.sqrt(2) - 1))

    def test_nonfinite_rejected(self):
        f = FilterSpec("single_lorentzian", 0.0, 1e9, 1.0)
        with pytest.raises(InputError):
            filter_transmission(f, math.inf)

    def test_unknown_kind_rejected(self):
        with pytest.raises(InputError):
            FilterSpec("boxcar", 0.0, 1e9, 1.0)


class TestApplyFilter:
    def test_wide_open_filter_is_identity(self):
        f = FilterSpec("single_lorentzian", 0.0, 1e18, 1.0, temporal_decay=0.0)
        ph = _photons([10, 20, 30], [1e6, -2e6, 3e6])
        out = apply_filter(ph, f, stream_rng(1, "f"))
        np.testing.assert_array_equal(out.times, ph.times)

    def test_mode0_through_narrow_cascade_survival(self):
        """Resonant-mode photons through the 22 MHz cascade survive with the
        quadrature-oracle average of cascade response over the mode profile."""
        cascade = FilterSpec("cascaded_lorentzian", 0.0, 22e6, 1.0)
        gamma = 7.2e6

        def integrand(x):
            pdf = (gamma / 2 / math.pi) / ((gamma / 2) ** 2 + x**2)
            return pdf * filter_transmission(cascade, x)

        oracle, _ = quad(integrand, -5e9, 5e9, limit=800, points=[0.0])
        # close to the single-Lorentzian convolution estimate 22/(22+7.2)
        assert oracle == pytest.approx(0.754, abs=0.002)

        rng = stream_rng(2, "mode")
        det = 0.5 * gamma * rng.standard_cauchy(200_000)
        ph = _photons(np.arange(200_000) * 1000, det)
        out = apply_filter(ph, cascade, stream_rng(3, "f"))
        assert len(out) / len(ph) == pytest.approx(oracle, abs=0.01)

    def test_temporal_decay_adds_exponential_delay(self):
        f = FilterSpec("single_lorentzian", 0.0, 1e18, 1.0, temporal_decay=7000.0)
        ph = _photons(np.zeros(100_000, np.int64))
        out = apply_filter(ph, f, stream_rng(4, "f"))
        assert np.all(np.diff(out.times) >= 0)
        assert np.mean(out.times) == pytest.approx(7000.0, rel=0.02)

    def test_flat_ensemble_energy_check(self):
        # mean survival of a spectrally flat ensemble over one period:
        # (pi/2) * fwhm * T0 / fsr
        fsr = 1.0649627e9
        f = FilterSpec("single_lorentzian", 0.0, 7.2e6, 0.43)
        rng = stream_rng(5, "flat")
        det = rng.uniform(-fsr / 2, fsr / 2, size=4_000_000)
        ph = _photons(np.arange(det.size) * 100, det)
        out = apply_filter(ph, f, stream_rng(6, "f"))
        expected = math.pi / 2 * 7.2e6 * 0.43 / fsr
        assert len(out) / len(ph) == pytest.approx(expected, rel=0.02)


class TestApplyLoss:
    def test_identity(self):
        ph = _photons([1, 2, 3])
        assert apply_loss(ph, 1.0, stream_rng(1, "l")) is ph

    def test_out_of_range(self):
        with pytest.raises(InputError):
            apply_loss(_photons([1]), 1.5, stream_rng(1, "l"))

    def test_thinning_composition(self):
        # two thinnings a then b match one thinning a*b in rate (3 sigma)
        n = 1_000_000
        ph = _photons(np.arange(n) * 1000)
        ab = apply_loss(apply_loss(ph, 0.6, stream_rng(2, "a")), 0.5, stream_rng(2, "b"))
        single = apply_loss(ph, 0.3, stream_rng(2, "c"))
        sigma = math.sqrt(n * 0.3 * 0.7)
        assert abs(len(ab) - len(single)) < 3 * math.sqrt(2) * sigma

    def test_thinned_poisson_rate(self):
        # thinning a Poisson stream of rate R gives Poisson rate eta*R
        from opoherald import SourceConfig, generate_pair_events

        batch = generate_pair_events(SourceConfig(pair_rate=1e6, seed=8), PS)
        out = apply_loss(batch.idler_events, 0.27, stream_rng(8, "l"))
        mean = 0.27e6
        assert abs(len(out) - mean) < 3 * math.sqrt(mean)


class TestDetect:
    def test_transparent_detector_identity(self):
        d = DetectorSpec(efficiency=1.0)
        ph = _photons([5, 10, 15])
        out = detect(ph, d, 100, stream_rng(1, "d"), channel=3)
        np.testing.assert_array_equal(out.times, [5, 10, 15])
        assert out.channel_set == frozenset({3})

    def test_efficiency_thinning(self):
        d = DetectorSpec(efficiency=0.25)
        ph = _photons(np.arange(1_000_000, dtype=np.int64) * 1000)
        out = detect(ph, d, 10**9 * 1000, stream_rng(2, "d"))
        assert abs(len(out) - 250_000) < 3 * math.sqrt(187_500)

    def test_dark_counts_poisson(self):
        d = DetectorSpec(efficiency=1.0, dark_rate=1e5)
        out = detect(_photons([]), d, PS, stream_rng(3, "d"))
        assert abs(len(out) - 1e5) < 3 * math.sqrt(1e5)

    def test_jitter_spread(self):
        d = DetectorSpec(efficiency=1.0, jitter_sigma=180.0)
        ph = _photons(np.full(200_000, 10**6, np.int64))
        out = detect(ph, d, 10**7, stream_rng(4, "d"))
        assert np.std(out.times.astype(float)) == pytest.approx(180.0, rel=0.02)

    def test_dead_time_monotone_and_maps_to_input(self):
        times = np.array([0, 10, 25, 26, 27, 80], np.int64)
        kept = apply_dead_time(times, 15)
        assert kept.tolist() == [0, 25, 80]
        # dead_time = 0 keeps everything
        np.testing.assert_array_equal(apply_dead_time(times, 0), times)

    def test_dead_time_output_not_larger(self):
        rng = stream_rng(5, "dt")
        times = np.sort(rng.integers(0, 10**6, 10_000)).astype(np.int64)
        assert apply_dead_time(times, 500).size <= times.size
