"""Trapped-ion experiment: preparation cycles, single-photon absorption,
spontaneous decay, and quantum-jump detection.

The ion is prepared in the metastable shelf state, exposed to the photon
stream, and watched for the fluorescence onset that signals a jump to the
ground state.  Within a cycle the first jump wins; afterwards the ion is
insensitive until the next preparation, which is what makes the observed
jump rate saturate below the raw absorption rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InputError
from .model import PS_PER_S, PhotonEvents, lorentzian_ensemble_average


class JumpCause(IntEnum):
    ABSORPTION = 0
    SPONTANEOUS = 1
    NONE = 2          # censored: cycle ended without a jump
    PREP_FAILED = 3


@dataclass(frozen=True)
class IonParams:
    """Atomic constants and the per-photon absorption calibration.

    ``p_abs_resonant`` is the ensemble-average absorption probability per
    resonant-mode photon arriving at the trap; ``photon_fwhm`` is the
    combined Lorentzian FWHM of the photon-frequency ensemble (mode width
    plus source jitter) against which that average is defined.  The peak
    (monochromatic, on-resonance) probability is derived from the two.
    """

    tau_sp: float = 1.17                  # s
    branching_to_ground: float = 0.94
    natural_fwhm: float = 23e6            # Hz
    p_abs_resonant: float = 2e-3
    detuning: float = 0.0                 # Hz, ion line center vs comb mode 0
    fluorescence_detection_rate: float = 2.33e5   # s^-1
    photon_fwhm: float = 11.2e6           # Hz

    def __post_init__(self):
        if not self.tau_sp > 0:
            raise InputError("tau_sp must be positive")
        if not 0.0 < self.branching_to_ground <= 1.0:
            raise InputError("branching_to_ground must be in (0, 1]")
        if not 0.0 < self.p_abs_resonant < 0.1:
            raise InputError("p_abs_resonant must be a small probability")
        if self.natural_fwhm <= 0 or self.photon_fwhm < 0:
            raise InputError("linewidths must be positive")
        if not self.fluorescence_detection_rate > 0:
            raise InputError("fluorescence_detection_rate must be positive")

    @property
    def peak_absorption_probability(self) -> float:
        """Absorption probability of an exactly resonant monochromatic photon.

        The peak of the convolution of unit-peak Lorentzians of FWHM a and b
        is a/(a+b), so matching the ensemble average fixes the peak at
        ``p_abs_resonant * (natural + photon) / natural``.
        """
        g, gp = self.natural_fwhm, self.photon_fwhm
        return self.p_abs_resonant * (g + gp) / g


@dataclass(frozen=True)
class SequenceParams:
    """Experimental cycle timing: prepare, expose, idle, repeat."""

    prep_duration: float = 71.0       # us (optical pumping + transfer)
    prep_success: float = 0.9999
    exposure: float = 7.0             # ms
    dead_overhead: float = 1800.0     # us per cycle (readout/idle; fitted)

    def __post_init__(self):
        if self.prep_duration <= 0 or self.exposure <= 0 or self.dead_overhead < 0:
            raise InputError("durations must be positive (dead_overhead >= 0)")
        if not 0.0 < self.prep_success <= 1.0:
            raise InputError("prep_success must be in (0, 1]")

    @property
    def prep_ps(self) -> int:
        return int(round(self.prep_duration * 1e6))

    @property
    def exposure_ps(self) -> int:
        return int(round(self.exposure * 1e9))

    @property
    def dead_ps(self) -> int:
        return int(round(self.dead_overhead * 1e6))

    @property
    def period_ps(self) -> int:
        return self.prep_ps + self.exposure_ps + self.dead_ps


class QuantumJumpRecord(NamedTuple):
    cycle_index: int
    jump_detection_time: int   # ps, absolute
    delay_since_prep: int      # ps, detection time minus end of preparation
    cause: JumpCause


@dataclass(frozen=True)
class IonRunResult:
    """Jump arrays plus per-cycle bookkeeping of one experiment run."""

    jump_cycles: np.ndarray          # int64
    jump_detection_times: np.ndarray  # int64 ps absolute
    delays_since_prep: np.ndarray    # int64 ps
    causes: np.ndarray               # int8 (JumpCause)
    cycle_outcomes: np.ndarray       # int8 (JumpCause) per cycle
    n_cycles: int
    n_absorption_events: int         # including absorptions that did not jump

    @property
    def n_jumps(self) -> int:
        return int(self.jump_cycles.size)

    @property
    def n_censored(self) -> int:
        return self.n_cycles - self.n_jumps

    def jump_rate(self, duration_ps: int) -> float:
        return self.n_jumps / (duration_ps / PS_PER_S)

    def records(self) -> Iterator[QuantumJumpRecord]:
        for i in range(self.n_jumps):
            yield QuantumJumpRecord(int(self.jump_cycles[i]),
                                    int(self.jump_detection_times[i]),
                                    int(self.delays_since_prep[i]),
                                    JumpCause(self.causes[i]))


def absorption_probability(ion: IonParams, delta) -> np.ndarray:
    """Absorption probability of a photon at detuning ``delta`` from mode 0.

    Lorentzian of the natural linewidth around the ion's line center, with
    the peak calibrated so the resonant photon-ensemble average equals
    ``p_abs_resonant``.
    """
    delta = np.asarray(delta, dtype=np.float64)
    half = 0.5 * ion.natural_fwhm
    out = ion.peak_absorption_probability * half**2 / (half**2 + (delta + ion.detuning) ** 2)
    return out if out.shape else float(out)


def ensemble_absorption_probability(ion: IonParams, center: float = 0.0,
                                    mode_fwhm: float | None = None,
                                    jitter_fwhm: float | None = None) -> float:
    """Mean absorption probability over the photon-frequency ensemble.

    The ensemble is Lorentzian(``mode_fwhm``) plus truncated
    Lorentzian(``jitter_fwhm``) jitter, centered at ``center`` relative to
    the comb reference.  Defaults use the calibration width ``photon_fwhm``
    without truncation, which returns ``p_abs_resonant`` at zero center.
    """
    if mode_fwhm is None and jitter_fwhm is None:
        mode_fwhm = ion.photon_fwhm
        jitter_fwhm = 0.0
    return lorentzian_ensemble_average(ion.peak_absorption_probability,
                                       ion.natural_fwhm, mode_fwhm or 0.0,
                                       jitter_fwhm or 0.0,
                                       center=center + ion.detuning)


def expected_line_fwhm(ion: IonParams, comb) -> float:
    """Expected FWHM of the measured line: Lorentzian widths add."""
    return ion.natural_fwhm + comb.mode_fwhm + comb.jitter_fwhm


def run_absorption_candidates(candidate_times: np.ndarray, duration: int,
                              seq: SequenceParams, ion: IonParams,
                              rng) -> IonRunResult:
    """Run the cycle machine on pre-thinned absorption candidates.

    ``candidate_times`` are sorted arrival times (ps) of photons that would
    be absorbed if the ion is available; availability gating, branching,
    spontaneous decay, and detection latency are applied here.  Thinning a
    photon stream by its absorption probability and feeding the survivors to
    this function is statistically identical to testing every photon.
    """
    times = np.ascontiguousarray(candidate_times, dtype=np.int64)
    if times.size and np.any(np.diff(times) < 0):
        raise InputError("candidate times must be sorted")
    period = seq.period_ps
    n_cycles = int(duration // period)
    if n_cycles < 1:
        raise InputError("duration shorter than one sequence cycle")
    prep_ps, expo_ps = seq.prep_ps, seq.exposure_ps
    tau_sp_ps = ion.tau_sp * PS_PER_S
    latency_ps = PS_PER_S / ion.fluorescence_detection_rate

    prep_ok = rng.random(n_cycles) < seq.prep_success
    t_spont = rng.exponential(tau_sp_ps, n_cycles)

    # first branching-success candidate per cycle
    first_abs = np.full(n_cycles, np.inf)
    cyc = times // period
    rel = (times - cyc * period - prep_ps).astype(np.float64)
    ok = (cyc < n_cycles) & (rel >= 0) & (rel < expo_ps)
    cyc, rel = cyc[ok], rel[ok]
    branch = rng.random(rel.size) < ion.branching_to_ground
    n_absorption = 0
    if rel.size:
        t_success = np.where(branch, rel, np.inf)
        groups, starts = np.unique(cyc, return_index=True)
        first_abs[groups] = np.minimum.reduceat(t_success, starts)

    t_spont_eff = np.where(t_spont < expo_ps, t_spont, np.inf)
    jump_rel = np.minimum(first_abs, t_spont_eff)
    jump_rel[~prep_ok] = np.inf

    outcomes = np.full(n_cycles, JumpCause.NONE, dtype=np.int8)
    outcomes[~prep_ok] = JumpCause.PREP_FAILED
    jumped = np.isfinite(jump_rel)
    outcomes[jumped & (first_abs <= t_spont_eff)] = JumpCause.ABSORPTION
    outcomes[jumped & (t_spont_eff < first_abs)] = JumpCause.SPONTANEOUS

    if rel.size:
        # absorptions: candidates arriving while the ion was still available
        avail = prep_ok[cyc] & (rel <= jump_rel[cyc])
        n_absorption = int(np.count_nonzero(avail))

    jump_cycles = np.nonzero(jumped)[0]
    latency = rng.exponential(latency_ps, jump_cycles.size)
    delays = np.rint(jump_rel[jump_cycles] + latency).astype(np.int64)
    detection = jump_cycles * period + prep_ps + delays
    return IonRunResult(
        jump_cycles=jump_cycles.astype(np.int64),
        jump_detection_times=detection,
        delays_since_prep=delays,
        causes=outcomes[jump_cycles],
        cycle_outcomes=outcomes,
        n_cycles=n_cycles,
        n_absorption_events=n_absorption,
    )


def run_ion_experiment(photons_at_trap: PhotonEvents, duration: int,
                       seq: SequenceParams, ion: IonParams, rng) -> IonRunResult:
    """Expose the ion to a photon stream for ``duration`` picoseconds.

    Every arriving photon is tested against its detuning-dependent
    absorption probability; survivors feed the cycle machine of
    :func:`run_absorption_candidates`.
    """
    if len(photons_at_trap) and np.any(np.diff(photons_at_trap.times) < 0):
        raise InputError("photon stream must be sorted")
    p = absorption_probability(ion, photons_at_trap.detunings)
    candidates = photons_at_trap.times[rng.random(len(photons_at_trap)) < p]
    return run_absorption_candidates(candidates, duration, seq, ion, rng)
