"""Spectral filters, lumped losses, and detectors.

All operations are Bernoulli thinnings plus time transformations on sorted
photon batches; each takes an explicit generator so pipelines stay
reproducible and shardable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError
from .model import EventStream, PhotonEvents, S_PER_PS
from .rng import stream_rng

#: a two-stage cascade of identical Lorentzian cavities has intensity FWHM
#: sqrt(sqrt(2)-1) times the single-stage FWHM
_CASCADE_STAGE_SCALE = 1.0 / math.sqrt(math.sqrt(2.0) - 1.0)

FILTER_KINDS = ("single_lorentzian", "cascaded_lorentzian")


@dataclass(frozen=True)
class FilterSpec:
    """A spectral filter: single Lorentzian line or a two-cavity cascade.

    ``fwhm`` is always the intensity FWHM of the complete filter.
    ``temporal_decay`` (ps) is the impulse-response time constant of the
    filter cavity; transmitted photons acquire an exponential storage delay
    of that mean (0 = instantaneous filter).
    """

    kind: str
    center: float
    fwhm: float
    peak_transmission: float
    temporal_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InputError(f"unknown filter kind {self.kind!r}")
        if not self.fwhm > 0:
            raise InputError("filter fwhm must be positive")
        if not 0.0 <= self.peak_transmission <= 1.0:
            raise InputError("peak_transmission must be in [0, 1]")
        if self.temporal_decay < 0:
            raise InputError("temporal_decay must be non-negative")


@dataclass(frozen=True)
class DetectorSpec:
    """Single-photon detector: efficiency, Gaussian jitter, darks, dead time."""

    efficiency: float
    jitter_sigma: float = 0.0
    dark_rate: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise InputError("efficiency must be in [0, 1]")
        if min(self.jitter_sigma, self.dark_rate, self.dead_time) < 0:
            raise InputError("jitter_sigma, dark_rate, dead_time must be non-negative")


def filter_transmission(f: FilterSpec, nu) -> np.ndarray:
    """Transmission probability of filter ``f`` at detuning ``nu`` (Hz)."""
    nu = np.asarray(nu, dtype=np.float64)
    if not np.all(np.isfinite(nu)):
        raise InputError("detuning must be finite")
    x = nu - f.center
    if f.kind == "single_lorentzian":
        half = 0.5 * f.fwhm
        out = f.peak_transmission * half**2 / (half**2 + x**2)
    else:
        half = 0.5 * f.fwhm * _CASCADE_STAGE_SCALE
        stage = half**2 / (half**2 + x**2)
        out = f.peak_transmission * stage**2
    return out if out.shape else float(out)


def filter_survival_mask(events: PhotonEvents, f: FilterSpec, rng) -> np.ndarray:
    """Bernoulli survival mask of ``events`` through filter ``f``."""
    t = filter_transmission(f, events.detunings)
    return rng.random(len(events)) < t


def apply_filter(events: PhotonEvents, f: FilterSpec, rng) -> PhotonEvents:
    """Thin ``events`` spectrally; add cavity storage delay if the filter has one."""
    kept = events.take(filter_survival_mask(events, f, rng))
    if f.temporal_decay > 0 and len(kept):
        delay = np.rint(rng.exponential(f.temporal_decay, size=len(kept))).astype(np.int64)
        kept = kept.with_times(kept.times + delay)
    return kept


def apply_loss(events: PhotonEvents, eta: float, rng) -> PhotonEvents:
    """Independent Bernoulli thinning with survival probability ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise InputError("eta must be in [0, 1]")
    if eta == 1.0:
        return events
    return events.take(rng.random(len(events)) < eta)


def apply_dead_time(times: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """Drop tags falling within ``dead_time_ps`` after an accepted tag."""
    if dead_time_ps <= 0 or times.size == 0:
        return times
    keep = np.empty(times.size, dtype=np.uint8)
    kernels.dead_time_keep(np.ascontiguousarray(times, np.int64), int(dead_time_ps), keep)
    return times[keep.astype(bool)]


def detect(events: PhotonEvents, d: DetectorSpec, duration: int, rng,
           channel: int = 0) -> EventStream:
    """Turn arriving photons into a detector tag stream.

    Photons survive with ``d.efficiency`` and are timestamped with Gaussian
    jitter; dark counts are an independent Poisson process over the full
    duration; the merged stream then passes the non-paralyzable dead time.
    Tags jittered outside [0, duration) are clamped into range.
    """
    kept = events.times[rng.random(len(events)) < d.efficiency]
    times = kept.astype(np.float64)
    if d.jitter_sigma > 0 and times.size:
        times = times + rng.normal(0.0, d.jitter_sigma, size=times.size)
    if d.dark_rate > 0:
        n_dark = rng.poisson(d.dark_rate * duration * S_PER_PS)
        times = np.concatenate([times, rng.random(n_dark) * duration])
    tags = np.clip(np.rint(times), 0, duration - 1).astype(np.int64)
    tags.sort(kind="stable")
    tags = apply_dead_time(tags, int(d.dead_time))
    return EventStream(tags, np.full(tags.size, channel, np.uint16),
                       frozenset({channel}), duration, validate=False)


def detection_chain(events: PhotonEvents, *, losses: dict | None,
                    filters=(), detector: DetectorSpec | None,
                    duration: int, seed: int, arm: str, channel: int = 0) -> EventStream:
    """Convenience composition: losses, filters, then detection, one arm.

    ``losses`` maps stage names to survival fractions; RNG streams are
    derived from ``seed`` and the stage names so every stage is independently
    reproducible.
    """
    for name, eta in (losses or {}).items():
        events = apply_loss(events, eta, stream_rng(seed, f"{arm}.loss.{name}"))
    for i, f in enumerate(filters):
        events = apply_filter(events, f, stream_rng(seed, f"{arm}.filter.{i}"))
    if detector is None:
        tags = events.times
        return EventStream(tags, np.full(tags.size, channel, np.uint16),
                           frozenset({channel}), duration, validate=False)
    return detect(events, detector, duration, stream_rng(seed, f"{arm}.detector"),
                  channel=channel)
