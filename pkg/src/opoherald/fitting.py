"""Nonlinear least-squares fits, Bayesian lifetime estimation, and the
single-photon spectroscopy pipeline.

The fitter is a damped (Levenberg-style) Gauss-Newton iteration with a
central-difference Jacobian: after each step the damping is reduced on
improvement and raised until an improving step is found otherwise.  Standard
errors come from the linearized covariance at the optimum.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .correlate import Histogram
from .errors import AnalysisError, DegenerateFitError, InputError
from .ion import IonParams, SequenceParams, run_ion_experiment
from .model import Origin, PhotonEvents, SpectralCombModel, PS_PER_S
from .rng import stream_rng
from .source import sample_mode_frequency, _poisson_times

_REL_STEP = 1e-6         # central-difference step, relative to parameter scale
_CONV_TOL = 1e-8         # relative parameter change for convergence
_MAX_ITER = 200


@dataclass(frozen=True)
class FitResult:
    """Outcome of one least-squares fit."""

    parameters: dict
    standard_errors: dict
    residual_sum_squares: float
    n_iterations: int
    converged: bool

    def __getitem__(self, name: str) -> float:
        return self.parameters[name]


# ---------------------------------------------------------------------------
# model families


def lorentzian(x, center, fwhm, amplitude, offset):
    half = 0.5 * fwhm
    return amplitude * half**2 / (half**2 + (x - center) ** 2) + offset


def exponential_decay(t, amplitude, tau, offset):
    return amplitude * np.exp(-np.asarray(t, dtype=np.float64) / tau) + offset


def exponential_survival(t, amplitude, tau):
    return amplitude * np.exp(-np.asarray(t, dtype=np.float64) / tau)


def exp_convolution(t, amplitude, tau1, tau2, t0, offset):
    """Convolution of two exponential decays, zero before ``t0``."""
    t = np.asarray(t, dtype=np.float64)
    dt = np.maximum(t - t0, 0.0)
    if abs(tau2 - tau1) < 1e-9 * max(abs(tau1), abs(tau2), 1.0):
        core = dt / (tau1 * tau1) * np.exp(-dt / tau1)
    else:
        core = (np.exp(-dt / tau2) - np.exp(-dt / tau1)) / (tau2 - tau1)
    return amplitude * np.where(t >= t0, core, 0.0) + offset


MODEL_FAMILIES = {
    "lorentzian": lorentzian,
    "exponential": exponential_decay,
    "exponential_survival": exponential_survival,
    "exp_convolution": exp_convolution,
}


# ---------------------------------------------------------------------------
# core fitter


def numeric_jacobian(fn: Callable, x: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of ``fn(x, *params)`` w.r.t. the parameters."""
    n = params.size
    base_scale = np.maximum(np.abs(params), 1.0)
    jac = np.empty((x.size, n))
    for j in range(n):
        step = _REL_STEP * base_scale[j]
        hi, lo = params.copy(), params.copy()
        hi[j] += step
        lo[j] -= step
        jac[:, j] = (fn(x, *hi) - fn(x, *lo)) / (2.0 * step)
    return jac


def nlls_fit(fn: Callable, x, y, p0: dict, weights=None,
             max_iter: int = _MAX_ITER, tol: float = _CONV_TOL) -> FitResult:
    """Weighted least-squares fit of ``fn(x, *params)`` to ``(x, y)``.

    ``p0`` maps parameter names to starting values (its order defines the
    argument order of ``fn``).  ``weights`` multiply squared residuals and
    are interpreted as ``1/sigma^2``; without weights the covariance is
    scaled by the reduced chi-square.  Non-convergence is reported through
    ``converged=False``, not an exception; singular normal equations raise
    :class:`DegenerateFitError`.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    names = list(p0)
    p = np.array([float(p0[k]) for k in names])
    if not np.all(np.isfinite(p)):
        raise InputError("initial parameters must be finite")
    if x.size < p.size:
        raise InputError("need at least one data point per free parameter")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    sw = np.sqrt(w)

    def cost(params):
        r = (y - fn(x, *params)) * sw
        return r, float(r @ r)

    r, rss = cost(p)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jac = numeric_jacobian(fn, x, p) * sw[:, None]
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        for _ in range(40):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), jtr)
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError("singular normal equations") from exc
            if not np.all(np.isfinite(step)):
                raise DegenerateFitError("singular normal equations")
            trial = p + step
            r_t, rss_t = cost(trial)
            if rss_t <= rss:
                rel_change = np.max(np.abs(step) / np.maximum(np.abs(p), 1e-300))
                p, r, rss = trial, r_t, rss_t
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 3.0
        if not accepted:
            break
        if rel_change < tol:
            converged = True
            break

    jac = numeric_jacobian(fn, x, p) * sw[:, None]
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("singular normal equations at optimum") from exc
    dof = max(x.size - p.size, 1)
    if weights is None:
        cov = cov * (rss / dof)
    errs = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(dict(zip(names, p.tolist())),
                     dict(zip(names, errs.tolist())),
                     rss, it, converged)


# ---------------------------------------------------------------------------
# histogram fits


class ExpConvolutionFit(NamedTuple):
    tau1: float
    tau2: float
    amplitude: float
    offset: float
    t0: float
    fit: FitResult
    single_exponential_fallback: bool


def rise_peak_time(tau1: float, tau2: float) -> float:
    """Time-to-peak of the two-exponential convolution (after ``t0``)."""
    return tau1 * tau2 * math.log(tau2 / tau1) / (tau2 - tau1) if tau1 != tau2 else tau1


def _tau1_from_peak(t_peak: float, tau2: float) -> float:
    lo, hi = 1e-6 * tau2, 0.999 * tau2
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rise_peak_time(mid, tau2) < t_peak:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fit_exp_convolution(h: Histogram) -> ExpConvolutionFit:
    """Fit a delay histogram with a convolution of two exponential decays.

    tau2 is seeded from the tail slope and tau1 from the rise time via the
    time-to-peak relation; if the rise is not resolved (would-be tau1 below
    one bin) a single-exponential fit is returned instead, flagged.
    """
    t = h.bin_centers().astype(np.float64)
    y = h.counts.astype(np.float64)
    if y.max() <= 0:
        raise AnalysisError("empty histogram")
    c0 = float(np.percentile(y, 5))
    i_peak = int(np.argmax(y))
    # tail slope from the upper decade of the decay
    tail = (t > t[i_peak]) & (y > c0 + 0.02 * (y[i_peak] - c0))
    if np.count_nonzero(tail) < 4:
        raise AnalysisError("no decaying tail to fit")
    slope = np.polyfit(t[tail], np.log(np.maximum(y[tail] - c0, 0.5)), 1)[0]
    if slope >= 0:
        raise AnalysisError("tail does not decay")
    tau2_0 = -1.0 / slope
    # onset: last bin below 10% of peak before the maximum
    below = np.nonzero((t < t[i_peak]) & (y - c0 < 0.1 * (y[i_peak] - c0)))[0]
    t0_0 = float(t[below[-1]]) if below.size else float(t[0])
    t_peak = float(t[i_peak]) - t0_0

    if t_peak < h.bin_width:
        # unresolved rise: single exponential from the peak onward
        sel = t >= t[i_peak]
        fit = nlls_fit(exponential_decay, t[sel] - t[i_peak], y[sel],
                       {"amplitude": y[i_peak] - c0, "tau": tau2_0, "offset": c0})
        pars = fit.parameters
        return ExpConvolutionFit(0.0, pars["tau"], pars["amplitude"], pars["offset"],
                                 float(t[i_peak]), fit, True)

    tau1_0 = _tau1_from_peak(t_peak, tau2_0)
    peak_val = exp_convolution(t0_0 + t_peak, 1.0, tau1_0, tau2_0, t0_0, 0.0)
    p0 = {"amplitude": (y[i_peak] - c0) / peak_val, "tau1": tau1_0, "tau2": tau2_0,
          "t0": t0_0, "offset": c0}
    fit = nlls_fit(exp_convolution, t, y, p0)
    pars = fit.parameters
    tau1, tau2 = sorted((abs(pars["tau1"]), abs(pars["tau2"])))
    return ExpConvolutionFit(tau1, tau2, pars["amplitude"], pars["offset"],
                             pars["t0"], fit, False)


# ---------------------------------------------------------------------------
# lifetime estimation


@dataclass(frozen=True)
class LifetimeEstimate:
    """Effective shelf-state lifetime from censored jump delays."""

    tau_eff: float              # s
    credible_interval: tuple    # (low, high) s, 68%
    n_jumps: int
    n_censored: int
    mle_tau: float              # closed-form censored estimator, s
    lower_bound_only: bool = False
    consistent_with_mle: bool = True


def censored_mle_lifetime(delays_ps, n_censored: int, exposure_ps: int) -> float:
    """Closed-form censored exponential MLE (seconds)."""
    delays = np.asarray(delays_ps, dtype=np.float64)
    if delays.size == 0:
        return math.inf
    total = float(delays.sum()) + float(n_censored) * float(exposure_ps)
    return total / delays.size / PS_PER_S


def bayesian_lifetime(jump_delays_ps, n_censored_cycles: int, exposure_ps: int,
                      bin_width_ps: int | None = None) -> LifetimeEstimate:
    """Two-step lifetime estimate from per-cycle jump delays.

    Each delay bin gets a Beta(1,1) posterior of its conditional decay
    probability (decays versus survivors among cycles still at risk); the
    survival curve of posterior means is then fit by an exponential.  The
    closed-form censored MLE is computed alongside as a cross-check and the
    two are flagged when they disagree by more than 5%.
    """
    delays = np.asarray(jump_delays_ps, dtype=np.float64)
    n_jumps = delays.size
    if n_jumps + n_censored_cycles <= 0:
        raise InputError("need at least one observed cycle")
    mle = censored_mle_lifetime(delays, n_censored_cycles, exposure_ps)
    if n_jumps == 0:
        low = n_censored_cycles * exposure_ps / PS_PER_S
        return LifetimeEstimate(math.inf, (low, math.inf), 0, n_censored_cycles,
                                mle, lower_bound_only=True)

    if bin_width_ps is None:
        # exposure/50 by default, widened when decays are sparse so the
        # uniform prior cannot dominate the per-bin posteriors
        n_target = int(np.clip(n_jumps // 25, 1, 50))
        bin_width_ps = max(int(exposure_ps // n_target), 1)
    n_bins = int(math.ceil(exposure_ps / bin_width_ps))
    edges = bin_width_ps * np.arange(n_bins + 1, dtype=np.float64)
    decays, _ = np.histogram(np.minimum(delays, edges[-1] - 0.5), bins=edges)
    total = n_jumps + n_censored_cycles
    at_risk = total - np.concatenate(([0], np.cumsum(decays)[:-1]))

    q = (decays + 1.0) / (at_risk + 2.0)
    var_q = ((decays + 1.0) * (at_risk - decays + 1.0)
             / ((at_risk + 2.0) ** 2 * (at_risk + 3.0)))
    survival = np.cumprod(1.0 - q)
    var_log_s = np.cumsum(var_q / (1.0 - q) ** 2)
    sigma_s = survival * np.sqrt(var_log_s)

    usable = at_risk >= 5
    t_s = edges[1:][usable] / PS_PER_S
    s_pts = survival[usable]
    if t_s.size >= 2:
        w = 1.0 / np.maximum(sigma_s[usable], 1e-12) ** 2
        fit = nlls_fit(exponential_survival, t_s, s_pts,
                       {"amplitude": 1.0, "tau": mle}, weights=w)
        tau = float(fit.parameters["tau"])
        sigma = float(fit.standard_errors["tau"])
    else:
        # too few decays to bin: the closed-form estimator with its Fisher error
        tau = mle
        sigma = mle / math.sqrt(n_jumps)
    consistent = True
    if n_jumps >= 100 and math.isfinite(mle) and abs(tau - mle) > 0.05 * mle:
        consistent = False
    return LifetimeEstimate(tau, (tau - sigma, tau + sigma), n_jumps,
                            n_censored_cycles, mle, consistent_with_mle=consistent)


def absorption_rate_from_lifetime(tau_eff: float, tau_sp: float,
                                  branching: float = 0.94) -> float:
    """Absorption rate implied by the lifetime shortening.

    ``(1/tau_eff - 1/tau_sp)/branching`` corrects for spontaneous decay and
    for absorptions that fall back to the shelf state undetected.  Small
    negative results (noise at zero flux) clamp to 0 with a warning.
    """
    if not tau_eff > 0:
        raise InputError("tau_eff must be positive")
    if tau_eff > 1.5 * tau_sp:
        raise InputError("tau_eff exceeds the spontaneous lifetime beyond noise tolerance")
    rate = (1.0 / tau_eff - 1.0 / tau_sp) / branching
    if rate < 0:
        warnings.warn("negative absorption rate clamped to 0", stacklevel=2)
        return 0.0
    return rate


# ---------------------------------------------------------------------------
# spectroscopy scan


@dataclass(frozen=True)
class LorentzianLine:
    center: float      # Hz
    fwhm: float        # Hz
    amplitude: float   # s^-1 peak absorption rate
    offset: float      # s^-1

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InputError("fwhm must be positive")


class ScanPoint(NamedTuple):
    detuning: float
    r_abs: float
    sigma: float


@dataclass(frozen=True)
class SpectroscopyScenario:
    """One spectroscopy configuration: resonant flux at the trap plus timing."""

    trap_rate: float                    # resonant photons/s arriving at the ion
    comb: SpectralCombModel
    ion: IonParams
    seq: SequenceParams
    cycles_per_point: int = 2000
    seed: int = 0
    split_halves: bool = True           # fit blue/red half-scans separately


@dataclass(frozen=True)
class ScanResult:
    points: list
    fits: dict           # half-scan name -> (LorentzianLine, FitResult)

    @property
    def mean_fwhm(self) -> float:
        return float(np.mean([line.fwhm for line, _ in self.fits.values()]))

    @property
    def mean_peak(self) -> float:
        return float(np.mean([line.amplitude + line.offset for line, _ in self.fits.values()]))


def _scan_one_point(args) -> ScanPoint:
    scenario, index, detuning = args
    comb = replace(scenario.comb, center_offset=detuning)
    duration = scenario.cycles_per_point * scenario.seq.period_ps
    rng_t = stream_rng(scenario.seed, "scan.times", index)
    times = _poisson_times(scenario.trap_rate, duration, rng_t)
    rng_m = stream_rng(scenario.seed, "scan.modes", index)
    _, detunings = sample_mode_frequency(comb, rng_m, size=times.size, mode_set=(0,))
    photons = PhotonEvents(times, detunings, np.zeros(times.size, np.int32),
                           Origin.PAIR_SIGNAL, validate=False)
    rng_ion = stream_rng(scenario.seed, "scan.ion", index)
    run = run_ion_experiment(photons, duration, scenario.seq, scenario.ion, rng_ion)
    est = bayesian_lifetime(run.delays_since_prep, run.n_censored, scenario.seq.exposure_ps)
    if est.lower_bound_only or est.tau_eff >= 1.5 * scenario.ion.tau_sp:
        # no measurable lifetime shortening at this point
        floor = 1.0 / (scenario.ion.branching_to_ground * duration / PS_PER_S)
        return ScanPoint(float(detuning), 0.0, float(floor))
    r = absorption_rate_from_lifetime(est.tau_eff, scenario.ion.tau_sp,
                                      scenario.ion.branching_to_ground)
    half_width = 0.5 * (est.credible_interval[1] - est.credible_interval[0])
    sigma = half_width / est.tau_eff**2 / scenario.ion.branching_to_ground
    return ScanPoint(float(detuning), float(r), float(sigma))


def _fit_line(points: Sequence[ScanPoint]) -> tuple:
    det = np.array([p.detuning for p in points])
    r = np.array([p.r_abs for p in points])
    w = 1.0 / np.maximum(np.array([p.sigma for p in points]), 1e-9) ** 2
    p0 = {"center": float(det[np.argmax(r)]), "fwhm": max(np.ptp(det) / 3.0, 1e6),
          "amplitude": float(r.max() - r.min()), "offset": float(r.min())}
    fit = nlls_fit(lorentzian, det, r, p0, weights=w)
    pars = fit.parameters
    line = LorentzianLine(pars["center"], abs(pars["fwhm"]), pars["amplitude"], pars["offset"])
    return line, fit


def spectroscopy_scan(scenario: SpectroscopyScenario, detunings,
                      max_workers: int = 1) -> ScanResult:
    """Measure the absorption line: one ion run per detuning, then fit.

    Each point runs the full cycle machine, estimates the effective
    lifetime, and converts it to an absorption rate.  With
    ``split_halves`` the blue (>= 0) and red (<= 0) halves are fitted
    separately, as when compensating slow source drifts.
    """
    detunings = sorted(float(d) for d in detunings)
    if len(detunings) < 7:
        raise InputError("need at least 7 detuning points")
    if max(detunings) - min(detunings) < 2.0 * expected_scan_fwhm(scenario):
        raise InputError("scan must span at least twice the expected line width")
    jobs = [(scenario, i, d) for i, d in enumerate(detunings)]
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(_scan_one_point, jobs))
    else:
        points = [_scan_one_point(j) for j in jobs]
    if all(p.r_abs <= 0 for p in points):
        raise DegenerateFitError("all scan points have zero absorption rate")
    fits = {}
    if scenario.split_halves:
        fits["blue"] = _fit_line([p for p in points if p.detuning >= 0])
        fits["red"] = _fit_line([p for p in points if p.detuning <= 0])
    else:
        fits["all"] = _fit_line(points)
    return ScanResult(points, fits)


def expected_scan_fwhm(scenario: SpectroscopyScenario) -> float:
    from .ion import expected_line_fwhm

    return expected_line_fwhm(scenario.ion, scenario.comb)


def write_scan_csv(points: Sequence[ScanPoint], path) -> None:
    """Scan CSV: ``detuning_hz,r_abs_per_s,sigma_per_s`` rows."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("detuning_hz,r_abs_per_s,sigma_per_s\n")
        for p in points:
            f.write(f"{p.detuning!r},{p.r_abs!r},{p.sigma!r}\n")
