"""Canonical bundled scenarios reproducing the source experiment's figures
and rate table, each with a pass/fail comparison against the published
values at desk scale.

Figure ids: ``1a`` (delay comb and cavity ring-down), ``1b`` (first-order
coherence, analytic), ``2`` (narrowband filtered correlation), ``5``
(heralded-absorption coincidences), ``6`` (single-photon spectroscopy),
``budget`` (rate-budget inversion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .budget import (BudgetInputs, infer_budget, pairs_per_mw, predict_rates,
                     write_budget_report)
from .correlate import (coincidence_stats, comb_period_estimate, cross_correlate,
                        g1_visibility, g1_zero_peak, write_histogram_csv)
from .errors import InputError
from .fitting import (SpectroscopyScenario, exponential_decay,
                      fit_exp_convolution, bayesian_lifetime, nlls_fit,
                      absorption_rate_from_lifetime, spectroscopy_scan,
                      write_scan_csv)
from .ion import (IonParams, SequenceParams, ensemble_absorption_probability,
                  run_absorption_candidates)
from .model import (PS_PER_S, SourceConfig, SpectralCombModel,
                    lorentzian_ensemble_average)
from .optics import DetectorSpec, FilterSpec
from .rng import stream_rng
from .scenario import AnalysisConfig, ArmConfig, Scenario, run_scenario
from .source import _poisson_times

DEFAULT_SEED = 20260809

#: measured values of the modeled experiment, used as comparison references
REF = {
    "cavity_decay_ns": 22.7,
    "round_trip_ps": 939.0,
    "g1_spacing_ps": 942.0,
    "coherence_time_ps": 1.4,
    "filter_decay_ns": 7.0,
    "coincidence_rate": 0.9,
    "snr_full_scale": 6.7,
    "line_fwhm_mhz": 34.2,
    "peak_r_abs": 670.0,
    "natural_fwhm_mhz": 23.0,
    "pair_rate": 2.52e6,
    "eta1": 4.4e-5,
    "eta2": 8.1e-3,
    "beta2": 5.7,
    "eta_unknown": 0.16,
    "eta_sat": 0.163,
    "pairs_per_mw": 8400.0,
}

FIGURE_IDS = ("1a", "1b", "2", "5", "6", "budget")


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    value: float
    reference: float
    criterion: str
    passed: bool


@dataclass(frozen=True)
class FigureReport:
    figure_id: str
    rows: tuple
    artifacts: tuple

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def format_report(report: FigureReport) -> str:
    lines = [f"figure {report.figure_id}"]
    width = max(len(r.quantity) for r in report.rows)
    for r in report.rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"  [{status}] {r.quantity:<{width}}  value={r.value:.6g}  "
                     f"reference={r.reference:.6g}  ({r.criterion})")
    for a in report.artifacts:
        lines.append(f"  wrote {a}")
    return "\n".join(lines)


def _write_report_csv(report: FigureReport, out: Path) -> Path:
    path = out / f"figure-{report.figure_id}_comparison.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("quantity,value,reference,criterion,passed\n")
        for r in report.rows:
            f.write(f"{r.quantity},{r.value!r},{r.reference!r},\"{r.criterion}\",{r.passed}\n")
    return path


def _band_row(quantity, value, ref, low, high, note="") -> ComparisonRow:
    crit = note or f"within [{low:.6g}, {high:.6g}]"
    return ComparisonRow(quantity, float(value), float(ref), crit,
                         bool(low <= value <= high))


def sig_round(x: float, digits: int = 2) -> float:
    """Round to ``digits`` significant figures."""
    if x == 0 or not math.isfinite(x):
        return x
    exponent = math.floor(math.log10(abs(x)))
    return round(x, digits - 1 - exponent)


def _sig_row(quantity, value, ref, digits=2) -> ComparisonRow:
    return ComparisonRow(quantity, float(value), float(ref),
                         f"equal to {digits} significant figures",
                         sig_round(value, digits) == sig_round(ref, digits))


# ---------------------------------------------------------------------------
# figure 1a: unfiltered delay comb


def figure_1a_scenario(seed: int = DEFAULT_SEED, duration_s: float = 60.0,
                       pair_rate: float = 2.5e5) -> Scenario:
    source = SourceConfig(pair_rate=pair_rate, comb=SpectralCombModel(), seed=seed)
    return Scenario(
        name="figure-1a", seed=seed, duration_s=duration_s, source=source,
        signal_arm=ArmConfig(channel=0, losses={"path": 0.23},
                             detector=DetectorSpec(0.3, jitter_sigma=130.0,
                                                   dark_rate=100.0, dead_time=50_000.0)),
        idler_arm=ArmConfig(channel=1, losses={"path": 0.28},
                            detector=DetectorSpec(0.25, jitter_sigma=130.0,
                                                  dark_rate=1000.0, dead_time=50_000.0)),
        analysis=AnalysisConfig(start_channel=1, stop_channel=0, bin_width_ps=100,
                                window_ps=(-3_000, 80_000)),
        write_tag_files=False,
    )


def _comb_peak_sums(h, period_ps: float, half_width_ps: float):
    """Total counts within +-half_width of every comb tooth inside the window."""
    centers = h.bin_centers()
    k_max = int((centers[-1] - half_width_ps) // period_ps)
    teeth = np.arange(0, k_max + 1) * period_ps
    sums = np.array([h.counts[np.abs(centers - t) <= half_width_ps].sum() for t in teeth])
    return teeth, sums.astype(np.float64)


def _peak_to_valley(h, period_ps: float, n_periods: int = 10) -> float:
    centers = h.bin_centers()
    peaks, valleys = [], []
    for k in range(n_periods):
        near_peak = np.abs(centers - k * period_ps) <= period_ps / 4
        near_valley = np.abs(centers - (k + 0.5) * period_ps) <= period_ps / 4
        if near_peak.any() and near_valley.any():
            peaks.append(h.counts[near_peak].max())
            valleys.append(max(h.counts[near_valley].min(), 1))
    return float(np.sum(peaks) / np.sum(valleys))


def figure_1a(out_dir, seed: int = DEFAULT_SEED, duration_s: float = 60.0,
              pair_rate: float = 2.5e5) -> FigureReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = figure_1a_scenario(seed, duration_s, pair_rate)
    manifest = run_scenario(scenario, out)
    from .correlate import read_histogram_csv

    h = read_histogram_csv(out / "figure-1a_correlation.csv")
    period = comb_period_estimate(h)
    teeth, sums = _comb_peak_sums(h, scenario.source.comb.round_trip_time, 350.0)
    fit = nlls_fit(exponential_decay, teeth, sums,
                   {"amplitude": float(sums[0]), "tau": 22_000.0,
                    "offset": float(sums[-5:].mean())})
    tau_ns = fit["tau"] / 1000.0
    pv = _peak_to_valley(h, scenario.source.comb.round_trip_time)

    rows = (
        _band_row("envelope_decay_ns", tau_ns, REF["cavity_decay_ns"],
                  REF["cavity_decay_ns"] * 0.85, REF["cavity_decay_ns"] * 1.15,
                  "22.7 ns +- 15%"),
        _band_row("comb_spacing_ps", period.period_ps, REF["round_trip_ps"],
                  REF["round_trip_ps"] - 4.0, REF["round_trip_ps"] + 4.0,
                  "939 +- 4 ps"),
        _band_row("peak_to_valley", pv, 5.0, 5.0, math.inf, "> 5"),
    )
    report = FigureReport("1a", rows, ("figure-1a_correlation.csv", "manifest.json"))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# figure 1b: first-order coherence (analytic)


def figure_1b(out_dir, seed: int = DEFAULT_SEED) -> FigureReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # the interferometer measurement quotes its own round trip of 942 ps
    comb = SpectralCombModel(round_trip_time=942.0)
    rt = comb.round_trip_time

    # peak positions: |g1| evaluated on grids straddling each expected revival
    spacing_exact = True
    for n in range(1, 6):
        grid = n * rt + np.linspace(-30.0, 30.0, 121)
        vals = g1_visibility(comb, grid)
        spacing_exact &= bool(abs(grid[np.argmax(vals)] - n * rt) < 1e-9)

    peak = g1_zero_peak(comb)
    n = np.arange(1, 6)
    envelope = g1_visibility(comb, n * rt)
    expected = np.exp(-math.pi * comb.mode_fwhm * n * rt / PS_PER_S)
    max_dev = float(np.max(np.abs(envelope / expected - 1.0)))

    tau_grid = np.linspace(-5.0 * rt, 5.0 * rt, 20_001)
    vis = g1_visibility(comb, tau_grid)
    csv_path = out / "figure-1b_coherence.csv"
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("delay_ps,visibility\n")
        for t, v in zip(tau_grid, vis):
            f.write(f"{t:.3f},{v!r}\n")

    rows = (
        _band_row("peak_spacing_ps", rt if spacing_exact else math.nan,
                  REF["g1_spacing_ps"], rt, rt, "revivals exactly at n x round trip"),
        _band_row("coherence_time_ps", peak.coherence_time_ps, REF["coherence_time_ps"],
                  REF["coherence_time_ps"] * 0.8, REF["coherence_time_ps"] * 1.2,
                  "1.4 ps +- 20%"),
        _band_row("envelope_vs_lorentzian_ft", max_dev, 0.0, 0.0, 0.01,
                  "revival heights match exp(-pi G n T) within 1%"),
        _band_row("max_visibility", float(vis.max()), 0.9, 0.9, 1.0,
                  "dark-count-free visibility reaches at least the measured 0.9"),
    )
    report = FigureReport("1b", rows, (csv_path.name,))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# figure 2: narrowband filtered correlation


def figure_2_scenario(seed: int = DEFAULT_SEED, duration_s: float = 1800.0,
                      pair_rate: float = 1.0e4) -> Scenario:
    """Desk-scale stand-in: reduced pair rate with lossless filters and
    detectors so 30 simulated minutes accumulate comparable statistics."""
    source = SourceConfig(pair_rate=pair_rate, comb=SpectralCombModel(), seed=seed)
    fbg = FilterSpec("single_lorentzian", center=0.0, fwhm=1.56e9, peak_transmission=1.0)
    cascade = FilterSpec("cascaded_lorentzian", center=0.0, fwhm=22e6,
                         peak_transmission=1.0, temporal_decay=7000.0)
    det = DetectorSpec(1.0, jitter_sigma=130.0)
    return Scenario(
        name="figure-2", seed=seed, duration_s=duration_s, source=source,
        signal_arm=ArmConfig(channel=0, filters=(cascade,), detector=det),
        idler_arm=ArmConfig(channel=1, filters=(fbg,), detector=det),
        analysis=AnalysisConfig(start_channel=1, stop_channel=0, bin_width_ps=3000,
                                window_ps=(-21_000, 150_000)),
        write_tag_files=False,
    )


def figure_2(out_dir, seed: int = DEFAULT_SEED, duration_s: float = 1800.0,
             pair_rate: float = 1.0e4) -> FigureReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_scenario(figure_2_scenario(seed, duration_s, pair_rate), out)
    from .correlate import read_histogram_csv

    h = read_histogram_csv(out / "figure-2_correlation.csv")
    fit = fit_exp_convolution(h)
    rows = (
        _band_row("filter_decay_ns", fit.tau1 / 1000.0, REF["filter_decay_ns"],
                  REF["filter_decay_ns"] - 1.0, REF["filter_decay_ns"] + 1.0,
                  "7.0 +- 1.0 ns"),
        _band_row("wave_packet_ns", fit.tau2 / 1000.0, REF["cavity_decay_ns"],
                  REF["cavity_decay_ns"] - 3.5, REF["cavity_decay_ns"] + 3.5,
                  "22.7 +- 3.5 ns"),
    )
    report = FigureReport("2", rows, ("figure-2_correlation.csv",))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# figure 5: heralded absorption coincidences


def _pruned_poisson_stream(rate: float, duration_ps: int, keep_centers: np.ndarray,
                           keep_window_ps: int, seed: int, label: str,
                           chunk_s: float = 20.0):
    """Poisson tag stream, keeping only tags near any ``keep_centers``.

    Returns (kept sorted times, total generated count).  Tags far from every
    center cannot enter the correlation window; dropping them bounds memory
    while the total count still measures the true rate.
    """
    chunk_ps = int(chunk_s * PS_PER_S)
    total = 0
    kept = []
    edges = np.asarray(keep_centers, dtype=np.int64)
    for i, t0 in enumerate(range(0, duration_ps, chunk_ps)):
        t1 = min(t0 + chunk_ps, duration_ps)
        rng = stream_rng(seed, label, i)
        n = rng.poisson(rate * (t1 - t0) / PS_PER_S)
        total += int(n)
        t = (t0 + rng.random(n) * (t1 - t0)).astype(np.int64)
        t.sort()
        if edges.size:
            idx = np.searchsorted(edges, t)
            right = edges[np.minimum(idx, edges.size - 1)] - t
            left = t - edges[np.maximum(idx - 1, 0)]
            near = (np.abs(right) <= keep_window_ps) | (np.abs(left) <= keep_window_ps)
            t = t[near]
        kept.append(t)
    return np.concatenate(kept) if kept else np.empty(0, np.int64), total


@dataclass(frozen=True)
class HeraldedRunConfig:
    """Operating point of the heralded-absorption run (figure 5)."""

    pair_rate: float = 2.52e6          # resonant pairs/s
    beta2: float = 5.7                 # herald-arm background fraction
    eta_smf: float = 0.27              # fiber link to the ion lab
    eta_fbs: float = 0.5               # beam splitter in front of the ion
    eta_opo_sspd: float = 0.2          # herald-arm coupling
    eta_sspd: float = 0.25             # herald detector efficiency
    eta_unknown: float = 0.16          # residual herald-arm loss
    fbg_fwhm: float = 1.56e9
    sspd_jitter_ps: float = 40.0
    bin_width_ps: int = 13_000_000     # 13 us


def figure_5(out_dir, seed: int = DEFAULT_SEED, scale: float = 0.1) -> FigureReport:
    """Heralded-absorption coincidence run at ``scale`` times 310 minutes.

    The resonant pair channel is simulated photon-by-photon on the ion side;
    herald-side survival is applied per photon, and the uncorrelated herald
    flood (background plus partners of undetected photons) enters as an
    exact Poisson stream at the complementary rate.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = HeraldedRunConfig()
    comb = SpectralCombModel()
    ion = IonParams(photon_fwhm=comb.mode_fwhm + comb.jitter_fwhm)
    seq = SequenceParams()
    duration_s = 310.0 * 60.0 * scale
    duration = int(duration_s * PS_PER_S)

    # herald survival of a resonant-mode photon: FBG spectral average x chain
    fbg_avg = lorentzian_ensemble_average(cfg.eta_opo_sspd, cfg.fbg_fwhm,
                                          comb.mode_fwhm, comb.jitter_fwhm)
    q2 = fbg_avg * cfg.eta_sspd * cfg.eta_unknown

    # ion-side candidate stream: photons that will be absorbed if the ion is ready
    p_mean = ensemble_absorption_probability(ion, mode_fwhm=comb.mode_fwhm,
                                             jitter_fwhm=comb.jitter_fwhm)
    trap_rate = cfg.pair_rate * cfg.eta_smf * cfg.eta_fbs
    lam_cand = trap_rate * p_mean
    candidates = _poisson_times(lam_cand, duration, stream_rng(seed, "fig5.candidates"))
    run = run_absorption_candidates(candidates, duration, seq, ion,
                                    stream_rng(seed, "fig5.ion"))
    starts = run.jump_detection_times

    # herald partners of the candidates (detected with probability q2)
    rng_p = stream_rng(seed, "fig5.partners")
    partners = candidates[rng_p.random(candidates.size) < q2].astype(np.float64)
    partners += rng_p.normal(0.0, cfg.sspd_jitter_ps, size=partners.size)
    partners = np.maximum(np.rint(partners), 0).astype(np.int64)

    # everything else on the herald detector is an uncorrelated Poisson flood
    flood_rate = (cfg.pair_rate * (1.0 + cfg.beta2) - lam_cand) * q2
    n_side = 40 if scale <= 0.3 else 20
    # bin grid centered on zero delay (the reference histogram's convention;
    # the detection-latency peak straddles the zero-delay bin edge otherwise)
    half_bin = cfg.bin_width_ps // 2
    window = (-n_side * cfg.bin_width_ps - half_bin,
              n_side * cfg.bin_width_ps + half_bin)
    keep_w = (n_side + 1) * cfg.bin_width_ps
    flood, n_flood = _pruned_poisson_stream(flood_rate, duration, starts, keep_w,
                                            seed, "fig5.flood")
    stops = np.concatenate([partners, flood])
    stops.sort(kind="stable")

    r1 = run.n_jumps / duration_s
    r2 = (n_flood + partners.size) / duration_s
    h = cross_correlate(starts, stops, cfg.bin_width_ps, window, total_time=duration_s)
    stats = coincidence_stats(h, (n_side - 2, n_side + 1))

    est = bayesian_lifetime(run.delays_since_prep, run.n_censored, seq.exposure_ps)
    r_abs = absorption_rate_from_lifetime(est.tau_eff, ion.tau_sp, ion.branching_to_ground)

    # measured floor against the accidental-coincidence model R1*R2*dt
    expected_bg = r1 * r2 * cfg.bin_width_ps / PS_PER_S
    n_bg_bins = h.n_bins - 3  # three peak-window bins excluded
    bg_counts_total = stats.background_per_bin_rate_BG * duration_s * n_bg_bins
    sigma_bg = expected_bg * math.sqrt(1.0 / max(bg_counts_total, 1.0)
                                       + 1.0 / max(run.n_jumps, 1))
    c_tol = 0.2 * REF["coincidence_rate"] + 2.0 * stats.peak_rate_sigma

    hist_path = out / "figure-5_correlation.csv"
    write_histogram_csv(h, hist_path)
    artifacts = [hist_path.name]
    if stats.peak_rate_C > 0:
        budget_inputs = BudgetInputs(
            R1=r1, R2=r2, C=stats.peak_rate_C, bin_width_dt=cfg.bin_width_ps / PS_PER_S,
            eta1_factors={"smf": cfg.eta_smf, "fbs": cfg.eta_fbs, "ion": ion.p_abs_resonant},
            known_eta2_factors={"opo_sspd": cfg.eta_opo_sspd, "sspd": cfg.eta_sspd},
            sigma_R1=r1 / math.sqrt(max(run.n_jumps, 1)),
            sigma_R2=r2 / math.sqrt(max(n_flood, 1)),
            sigma_C=stats.peak_rate_sigma)
        budget_path = out / "figure-5_budget.txt"
        write_budget_report(infer_budget(budget_inputs, r_abs), budget_path, pump_mw=300.0)
        artifacts.append(budget_path.name)

    snr_ref = REF["snr_full_scale"] * math.sqrt(scale)
    rows = (
        _band_row("coincidence_rate_per_s", stats.peak_rate_C, REF["coincidence_rate"],
                  REF["coincidence_rate"] - c_tol, REF["coincidence_rate"] + c_tol,
                  "0.9/s +- 20% within counting error"),
        _band_row("snr", stats.snr, snr_ref, 2.0, math.inf, "> 2"),
        _band_row("background_vs_R1R2dt", stats.background_per_bin_rate_BG,
                  expected_bg, expected_bg - 3 * sigma_bg, expected_bg + 3 * sigma_bg,
                  "accidental floor R1*R2*dt within 3 sigma"),
    )
    if scale >= 1.0:
        rows = rows + (_band_row("snr_full_scale", stats.snr, REF["snr_full_scale"],
                                 REF["snr_full_scale"] - 1.5, REF["snr_full_scale"] + 1.5,
                                 "6.7 +- 1.5"),)
    report = FigureReport("5", rows, tuple(artifacts))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# figure 6: single-photon spectroscopy


def figure_6(out_dir, seed: int = DEFAULT_SEED, cycles_per_point: int = 2000,
             n_points: int = 15, span_hz: float = 120e6,
             max_workers: int = 1) -> FigureReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comb = SpectralCombModel()
    ion = IonParams(photon_fwhm=comb.mode_fwhm + comb.jitter_fwhm)
    scenario = SpectroscopyScenario(trap_rate=3.4e5, comb=comb, ion=ion,
                                    seq=SequenceParams(),
                                    cycles_per_point=cycles_per_point, seed=seed)
    detunings = np.linspace(-span_hz / 2, span_hz / 2, n_points)
    scan = spectroscopy_scan(scenario, detunings, max_workers=max_workers)

    # laser-like limit: photon width and jitter switched off
    laser_comb = SpectralCombModel(mode_fwhm=0.0, jitter_fwhm=0.0)
    laser_ion = replace(ion, photon_fwhm=0.0)
    laser = spectroscopy_scan(replace(scenario, comb=laser_comb, ion=laser_ion,
                                      seed=seed + 1),
                              detunings, max_workers=max_workers)

    scan_path = out / "figure-6_scan.csv"
    write_scan_csv(scan.points, scan_path)
    laser_path = out / "figure-6_laser_scan.csv"
    write_scan_csv(laser.points, laser_path)

    rows = (
        _band_row("line_fwhm_mhz", scan.mean_fwhm / 1e6, REF["line_fwhm_mhz"],
                  REF["line_fwhm_mhz"] - 1.5, REF["line_fwhm_mhz"] + 1.5,
                  "34.2 +- 1.5 MHz"),
        _band_row("peak_r_abs_per_s", scan.mean_peak, REF["peak_r_abs"],
                  REF["peak_r_abs"] * 0.93, REF["peak_r_abs"] * 1.07,
                  "670/s +- 7%"),
        _band_row("laser_fwhm_mhz", laser.mean_fwhm / 1e6, REF["natural_fwhm_mhz"],
                  REF["natural_fwhm_mhz"] - 1.5, REF["natural_fwhm_mhz"] + 1.5,
                  "23 +- 1.5 MHz"),
    )
    report = FigureReport("6", rows, (scan_path.name, laser_path.name))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# budget table


def figure_budget(out_dir, seed: int = DEFAULT_SEED) -> FigureReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = BudgetInputs(R1=111.0, R2=136_000.0, C=0.9, bin_width_dt=13e-6,
                          eta1_factors={"smf": 0.27, "fbs": 0.5, "ion": 0.002},
                          known_eta2_factors={"opo_sspd": 0.2, "sspd": 0.25})
    outputs = infer_budget(inputs, R_abs=680.0)
    path = out / "figure-budget_report.txt"
    write_budget_report(outputs, path, pump_mw=300.0)

    fwd = predict_rates(outputs.P, inputs.beta1, outputs.beta2, outputs.eta1,
                        outputs.eta2, inputs.bin_width_dt)
    roundtrip = max(abs(fwd.R1 - inputs.R1) / inputs.R1,
                    abs(fwd.R2 - inputs.R2) / inputs.R2,
                    abs(fwd.C - inputs.C) / inputs.C)

    rows = (
        _sig_row("pair_rate_per_s", outputs.P, REF["pair_rate"]),
        _sig_row("eta1", outputs.eta1, REF["eta1"]),
        _sig_row("eta2", outputs.eta2, REF["eta2"]),
        _sig_row("beta2", outputs.beta2, REF["beta2"]),
        _sig_row("eta_unknown", outputs.eta_unknown, REF["eta_unknown"]),
        _sig_row("eta_sat", outputs.eta_sat, REF["eta_sat"]),
        _sig_row("pairs_per_mw", pairs_per_mw(outputs.P, 300.0), REF["pairs_per_mw"]),
        _band_row("forward_inverse_roundtrip", roundtrip, 0.0, 0.0, 1e-12,
                  "relative closure of the rate algebra"),
    )
    report = FigureReport("budget", rows, (path.name,))
    _write_report_csv(report, out)
    return report


# ---------------------------------------------------------------------------
# dispatch


def reproduce_figure(figure_id: str, out_dir, seed: int = DEFAULT_SEED,
                     **kwargs) -> FigureReport:
    """Run the canonical scenario for one figure id and compare to the
    published values."""
    recipes = {"1a": figure_1a, "1b": figure_1b, "2": figure_2,
               "5": figure_5, "6": figure_6, "budget": figure_budget}
    if figure_id not in recipes:
        raise InputError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
    return recipes[figure_id](out_dir, seed=seed, **kwargs)
