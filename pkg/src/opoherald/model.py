"""Shared domain types: time tags, event streams, photon batches, and the
cavity comb model of the pair-source spectrum.

Conventions
-----------
* Time is a 64-bit integer count of picoseconds since run start.  1 ps is
  roughly 40x finer than the narrowest simulated physical scale (detector
  jitter), and integer timestamps cannot drift.
* Frequencies are double-precision Hz relative to the atomic-resonance
  reference (the 854 nm line center); absolute optical frequencies never
  appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InputError

PS_PER_S = 10**12
S_PER_PS = 1e-12

#: sin(x)/x falls to 1/sqrt(2) at this argument; sets the sinc^2 FWHM scale.
_SINC2_HALF_ARG = 1.3915573782515135

#: source-jitter draws are truncated at +-50 FWHM so all moments stay finite
#: and Lorentzian FWHM addition holds to well below a percent
JITTER_TRUNC_FWHM = 50.0


class TimeTag(NamedTuple):
    """One detection event: integer picoseconds and a channel id."""

    time: int
    channel: int


class Origin(IntEnum):
    """Provenance label of a simulated photon."""

    PAIR_SIGNAL = 0
    PAIR_IDLER = 1
    BACKGROUND_SIGNAL_ARM = 2
    BACKGROUND_IDLER_ARM = 3


class PhotonEvent(NamedTuple):
    """Scalar view of one pre-detection photon."""

    emission_time: int
    detuning: float
    mode_index: int
    origin: Origin


def _as_readonly(a: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    if out is a:
        out = out.view()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EventStream:
    """Time-sorted detection events on a declared set of channels."""

    times: np.ndarray
    channels: np.ndarray
    channel_set: frozenset
    duration: int

    def __init__(self, times, channels, channel_set, duration, validate: bool = True):
        times = _as_readonly(np.asarray(times), np.int64)
        channels = _as_readonly(np.asarray(channels), np.uint16)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "channel_set", frozenset(int(c) for c in channel_set))
        object.__setattr__(self, "duration", int(duration))
        if validate:
            self._validate()
        else:
            # sortedness is asserted even on internal fast paths (debug builds)
            assert times.size < 2 or int(np.diff(times).min()) >= 0, \
                "unsorted event stream"

    def _validate(self) -> None:
        if self.times.shape != self.channels.shape:
            raise InputError("times and channels must have equal length")
        if self.duration <= 0:
            raise InputError("duration must be positive")
        if self.times.size:
            if int(self.times[0]) < 0:
                raise InputError("timestamps must be non-negative")
            if np.any(np.diff(self.times) < 0):
                raise InputError("timestamps must be non-decreasing")
            if int(self.times[-1]) >= self.duration:
                raise InputError("every tag time must be below the stream duration")
            present = frozenset(int(c) for c in np.unique(self.channels))
            if not present <= self.channel_set:
                raise InputError(f"undeclared channels in stream: {sorted(present - self.channel_set)}")

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self) -> Iterator[TimeTag]:
        for t, c in zip(self.times.tolist(), self.channels.tolist()):
            yield TimeTag(t, c)

    def channel_times(self, channel: int) -> np.ndarray:
        """Sorted times of a single channel."""
        return self.times[self.channels == channel]

    def rate(self, channel: int | None = None) -> float:
        """Mean count rate in s^-1 (for one channel or the whole stream)."""
        n = len(self) if channel is None else int(np.count_nonzero(self.channels == channel))
        return n / (self.duration * S_PER_PS)

    @classmethod
    def from_channel_times(cls, per_channel: dict, duration: int) -> "EventStream":
        """Merge ``{channel: sorted times}`` into one sorted stream."""
        chans = sorted(per_channel)
        times = np.concatenate([np.asarray(per_channel[c], dtype=np.int64) for c in chans]) \
            if chans else np.empty(0, np.int64)
        labels = np.concatenate([np.full(len(per_channel[c]), c, np.uint16) for c in chans]) \
            if chans else np.empty(0, np.uint16)
        order = np.argsort(times, kind="stable")
        return cls(times[order], labels[order], frozenset(chans), duration)


@dataclass(frozen=True)
class PhotonEvents:
    """Column-oriented batch of photons with a common origin label.

    Emission times are sorted; ``detunings`` are offsets from the atomic
    resonance in Hz and ``mode_indices`` label the comb mode (0 = resonant).
    """

    times: np.ndarray
    detunings: np.ndarray
    mode_indices: np.ndarray
    origin: Origin

    def __init__(self, times, detunings, mode_indices, origin, validate: bool = True):
        object.__setattr__(self, "times", _as_readonly(np.asarray(times), np.int64))
        object.__setattr__(self, "detunings", _as_readonly(np.asarray(detunings), np.float64))
        object.__setattr__(self, "mode_indices", _as_readonly(np.asarray(mode_indices), np.int32))
        object.__setattr__(self, "origin", Origin(origin))
        if validate and self.times.size:
            if self.times.shape != self.detunings.shape or self.times.shape != self.mode_indices.shape:
                raise InputError("photon batch columns must have equal length")
            if np.any(np.diff(self.times) < 0):
                raise InputError("photon emission times must be non-decreasing")

    @classmethod
    def empty(cls, origin: Origin) -> "PhotonEvents":
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0, np.int32), origin)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> PhotonEvent:
        return PhotonEvent(int(self.times[i]), float(self.detunings[i]),
                           int(self.mode_indices[i]), self.origin)

    def take(self, index) -> "PhotonEvents":
        """Subset by boolean mask or index array (order must stay sorted)."""
        return PhotonEvents(self.times[index], self.detunings[index],
                            self.mode_indices[index], self.origin, validate=False)

    def with_times(self, times: np.ndarray) -> "PhotonEvents":
        """Same photons, new (sorted) times; used after temporal optics."""
        order = np.argsort(times, kind="stable")
        return PhotonEvents(times[order], self.detunings[order],
                            self.mode_indices[order], self.origin, validate=False)


@dataclass(frozen=True)
class SpectralCombModel:
    """Spectrum of the below-threshold pair source.

    A comb of cavity modes (Airy profile, mode FWHM ``mode_fwhm``, spacing
    ``fsr``) under a sinc^2 phase-matching envelope of FWHM ``envelope_fwhm``.
    ``fsr`` and ``round_trip_time`` are dual representations; pass either and
    the other is derived.  ``jitter_fwhm`` is the residual statistical jitter
    of the stabilized source (Lorentzian, truncated at +-50 FWHM) and
    ``center_offset`` a deterministic shift of the whole comb.
    """

    fsr: float = None  # type: ignore[assignment]
    mode_fwhm: float = 7.2e6
    envelope_fwhm: float = 275e9
    round_trip_time: float = None  # type: ignore[assignment]
    cavity_decay_time: float = 22700.0
    center_offset: float = 0.0
    jitter_fwhm: float = 4.0e6

    def __post_init__(self):
        if self.fsr is None and self.round_trip_time is None:
            object.__setattr__(self, "round_trip_time", 939.0)
        if self.fsr is None:
            object.__setattr__(self, "fsr", PS_PER_S / self.round_trip_time)
        elif self.round_trip_time is None:
            object.__setattr__(self, "round_trip_time", PS_PER_S / self.fsr)
        self._validate()

    def _validate(self) -> None:
        if not (self.fsr > 0 and self.envelope_fwhm > 0):
            raise InputError("fsr and envelope_fwhm must be positive")
        # mode_fwhm == 0 is the degenerate laser-like limit, allowed for
        # diagnostics; the spectral-density functions reject it
        if min(self.mode_fwhm, self.cavity_decay_time, self.jitter_fwhm) < 0:
            raise InputError("mode_fwhm, cavity_decay_time, jitter_fwhm must be non-negative")
        if abs(self.fsr * self.round_trip_time * S_PER_PS - 1.0) > 1e-6:
            raise InputError("fsr and round_trip_time are inconsistent")
        if self.mode_fwhm > 0:
            if self.cavity_decay_time > 0:
                ratio = self.mode_fwhm * 2.0 * math.pi * self.cavity_decay_time * S_PER_PS
                if abs(ratio - 1.0) > 0.15:
                    raise InputError("mode_fwhm and cavity_decay_time disagree beyond 15%")
            if not (self.envelope_fwhm > 10.0 * self.fsr and self.fsr > 10.0 * self.mode_fwhm):
                raise InputError("scale ordering envelope_fwhm >> fsr >> mode_fwhm violated")

    @property
    def envelope_mode_count(self) -> float:
        """Number of comb modes inside the envelope FWHM."""
        return self.envelope_fwhm / self.fsr

    def envelope(self, nu) -> np.ndarray:
        """sinc^2 phase-matching envelope, peak 1 at the comb center."""
        x = (np.asarray(nu, dtype=np.float64) - self.center_offset) / self.envelope_fwhm
        # np.sinc(z) = sin(pi z)/(pi z); rescale so the FWHM lands where asked
        return np.sinc(2.0 * _SINC2_HALF_ARG / np.pi * x) ** 2

    def mode_weights(self, max_mode: int) -> np.ndarray:
        """Relative emission weight of modes -max_mode..+max_mode."""
        m = np.arange(-max_mode, max_mode + 1)
        x = m * self.fsr / self.envelope_fwhm
        return np.sinc(2.0 * _SINC2_HALF_ARG / np.pi * x) ** 2


def comb_spectral_density(model: SpectralCombModel, nu) -> np.ndarray:
    """Spectral density of the pair source at detuning ``nu`` (Hz).

    Airy comb times sinc^2 envelope, normalized so the resonant-mode peak is
    exactly 1 when ``center_offset`` is zero.  Accepts scalars or arrays.
    """
    nu = np.asarray(nu, dtype=np.float64)
    if not np.all(np.isfinite(nu)):
        raise InputError("detuning must be finite")
    if model.mode_fwhm <= 0:
        raise InputError("spectral density undefined for zero mode width")
    x = nu - model.center_offset
    coeff = (2.0 * model.fsr / (math.pi * model.mode_fwhm)) ** 2
    airy = 1.0 / (1.0 + coeff * np.sin(math.pi * x / model.fsr) ** 2)
    out = model.envelope(nu) * airy
    return out if out.shape else float(out)


def linewidth_from_decay(tau_ps: float) -> float:
    """FWHM linewidth (Hz) of a field with intensity decay time ``tau_ps``."""
    if not tau_ps > 0:
        raise InputError("decay time must be positive")
    return 1.0 / (2.0 * math.pi * tau_ps * S_PER_PS)


def decay_from_linewidth(fwhm_hz: float) -> float:
    """Inverse of :func:`linewidth_from_decay`, in picoseconds."""
    if not fwhm_hz > 0:
        raise InputError("linewidth must be positive")
    return 1.0 / (2.0 * math.pi * fwhm_hz) * PS_PER_S


def lorentzian_ensemble_average(peak: float, fwhm: float, mode_fwhm: float,
                                jitter_fwhm: float, center: float = 0.0,
                                n_quad: int = 200_001) -> float:
    """Average of a peak-``peak`` Lorentzian of FWHM ``fwhm`` over the
    photon-frequency ensemble of one comb mode.

    The ensemble is Lorentzian(``mode_fwhm``) plus a truncated
    Lorentzian(``jitter_fwhm``) offset, centered at ``center``.  The
    Lorentzian part convolves analytically (the peak of the convolution of
    unit-peak Lorentzians a and b is a/(a+b)); the truncated jitter is
    integrated numerically.
    """
    h = 0.5 * fwhm
    g = 0.5 * mode_fwhm
    amp = peak * h / (h + g)
    heff = h + g
    if jitter_fwhm <= 0:
        return float(amp * heff**2 / (heff**2 + center**2))
    cut = JITTER_TRUNC_FWHM * jitter_fwhm
    j = np.linspace(-cut, cut, n_quad)
    pdf = 1.0 / (1.0 + (j / (0.5 * jitter_fwhm)) ** 2)
    pdf /= np.trapezoid(pdf, j)
    return float(np.trapezoid(pdf * amp * heff**2 / (heff**2 + (center + j) ** 2), j))


@dataclass(frozen=True)
class SourceConfig:
    """Pair-source operating point.

    ``pair_rate`` is the generation rate of the simulated pair ensemble; with
    ``mode_set`` restricted (e.g. ``(0,)`` for the locked resonant channel) it
    is the rate of that subset.  Background rates are unpaired photons on each
    arm, spectrally identical to pair photons.  ``pump_power_mw`` is metadata
    for the pairs-per-milliwatt bookkeeping.
    """

    pair_rate: float
    background_signal_rate: float = 0.0
    background_idler_rate: float = 0.0
    pump_power_mw: float = 300.0
    comb: SpectralCombModel = field(default_factory=SpectralCombModel)
    seed: int = 0
    mode_set: tuple | None = None

    def __post_init__(self):
        if self.pair_rate < 0 or self.background_signal_rate < 0 or self.background_idler_rate < 0:
            raise InputError("rates must be non-negative")
        if not self.pump_power_mw > 0:
            raise InputError("pump_power_mw must be positive")
        if self.mode_set is not None:
            object.__setattr__(self, "mode_set", tuple(int(m) for m in self.mode_set))
