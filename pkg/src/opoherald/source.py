"""Photon-pair and background event generation.

Idler photons leave the source cavity immediately; each signal partner is
stored for a geometric number of round trips before exiting, which produces
the comb of discrete delays with an exponential envelope.  Frequencies are
drawn mode-first (sinc^2 envelope weights), then Lorentzian within the mode,
plus the truncated-Lorentzian jitter of the stabilized source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InputError
from .model import (JITTER_TRUNC_FWHM, Origin, PhotonEvents, SourceConfig,
                    SpectralCombModel, S_PER_PS)
from .rng import stream_rng

_MAX_EVENTS = 2**31
#: envelope cutoff for mode sampling, in units of envelope FWHM
_MODE_CUTOFF_FWHM = 20.0


@dataclass(frozen=True)
class PairEventBatch:
    """Correlated signal/idler batches plus the index links of true pairs.

    ``pair_links[k] = (i_signal, i_idler)`` indexes into the two sorted
    batches; the signal of a link never precedes its idler.
    """

    signal_events: PhotonEvents
    idler_events: PhotonEvents
    pair_links: np.ndarray

    def __post_init__(self):
        links = np.ascontiguousarray(self.pair_links, dtype=np.int64)
        links.flags.writeable = False
        object.__setattr__(self, "pair_links", links)

    def __len__(self) -> int:
        return self.pair_links.shape[0]

    def linked_delays(self) -> np.ndarray:
        """signal minus idler emission time for every true pair (ps)."""
        return (self.signal_events.times[self.pair_links[:, 0]]
                - self.idler_events.times[self.pair_links[:, 1]])


def _poisson_times(rate_per_s: float, duration_ps: int, rng) -> np.ndarray:
    """Sorted int64 arrival times of a homogeneous Poisson process."""
    mean = rate_per_s * duration_ps * S_PER_PS
    if mean > _MAX_EVENTS:
        raise CapacityError(f"expected {mean:.3g} events exceeds 2^31; shard the run")
    n = rng.poisson(mean) if mean > 0 else 0
    times = rng.random(n) * duration_ps
    times.sort()
    return times.astype(np.int64)


def sample_signal_delay(comb: SpectralCombModel, rng, size: int | None = None):
    """Signal storage delay: k round trips, k geometric.

    Per-round-trip survival is ``exp(-round_trip_time/cavity_decay_time)``;
    the mean delay is close to the cavity decay time.
    """
    s = math.exp(-comb.round_trip_time / comb.cavity_decay_time) \
        if comb.cavity_decay_time > 0 else 0.0
    k = rng.geometric(1.0 - s, size=size) - 1
    delay = np.rint(k * comb.round_trip_time).astype(np.int64)
    return delay if size is not None else int(delay)


def _truncated_cauchy(fwhm: float, rng, size: int) -> np.ndarray:
    if fwhm <= 0:
        return np.zeros(size)
    half_angle = math.atan(2.0 * JITTER_TRUNC_FWHM)  # 50 FWHM in HWHM units
    u = rng.uniform(-half_angle, half_angle, size=size)
    return 0.5 * fwhm * np.tan(u)


def sample_mode_frequency(comb: SpectralCombModel, rng, size: int | None = None,
                          mode_set: tuple | None = None):
    """Draw (mode_index, detuning) pairs from the comb spectrum.

    Mode indices follow the sinc^2 envelope evaluated at the mode centers
    (optionally restricted to ``mode_set``); the within-mode offset is
    Lorentzian with FWHM ``mode_fwhm``; source jitter adds a truncated
    Lorentzian of FWHM ``jitter_fwhm``.
    """
    n = 1 if size is None else size
    if mode_set is None:
        max_mode = int(math.ceil(_MODE_CUTOFF_FWHM * comb.envelope_fwhm / comb.fsr))
        modes_axis = np.arange(-max_mode, max_mode + 1)
    else:
        modes_axis = np.asarray(sorted(mode_set), dtype=np.int64)
    weights = comb.envelope(modes_axis * comb.fsr + comb.center_offset)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    modes = modes_axis[np.searchsorted(cdf, rng.random(n), side="right")].astype(np.int32)

    detuning = modes * comb.fsr + comb.center_offset
    detuning = detuning + 0.5 * comb.mode_fwhm * rng.standard_cauchy(n)
    detuning = detuning + _truncated_cauchy(comb.jitter_fwhm, rng, n)
    if size is None:
        return int(modes[0]), float(detuning[0])
    return modes, detuning


def generate_pair_events(cfg: SourceConfig, duration: int, shard: int = 0) -> PairEventBatch:
    """Simulate all photon pairs emitted during ``duration`` picoseconds.

    Idler emissions are a homogeneous Poisson process of rate
    ``cfg.pair_rate``; every idler gets a signal partner delayed by
    :func:`sample_signal_delay` with the opposite comb mode index.  Output is
    fully determined by ``(cfg.seed, shard)``.  Disjoint shards may be
    generated independently and merged.
    """
    if duration <= 0:
        raise InputError("duration must be positive")
    rng_t = stream_rng(cfg.seed, "pairs.times", shard)
    rng_d = stream_rng(cfg.seed, "pairs.delays", shard)
    rng_ms = stream_rng(cfg.seed, "pairs.modes.signal", shard)
    rng_mi = stream_rng(cfg.seed, "pairs.modes.idler", shard)

    idler_times = _poisson_times(cfg.pair_rate, duration, rng_t)
    n = idler_times.size
    if n == 0:
        empty_links = np.empty((0, 2), np.int64)
        return PairEventBatch(PhotonEvents.empty(Origin.PAIR_SIGNAL),
                              PhotonEvents.empty(Origin.PAIR_IDLER), empty_links)

    delays = sample_signal_delay(cfg.comb, rng_d, size=n)
    signal_times = idler_times + delays

    modes, sig_detuning = sample_mode_frequency(cfg.comb, rng_ms, size=n,
                                                mode_set=cfg.mode_set)
    # energy conservation: idler mode mirrors the signal mode
    _, idl_offset = sample_mode_frequency(cfg.comb, rng_mi, size=n, mode_set=(0,))
    idl_detuning = -modes * cfg.comb.fsr + idl_offset

    order = np.argsort(signal_times, kind="stable")
    signal = PhotonEvents(signal_times[order], sig_detuning[order], modes[order],
                          Origin.PAIR_SIGNAL, validate=False)
    idler = PhotonEvents(idler_times, idl_detuning, -modes, Origin.PAIR_IDLER,
                         validate=False)
    links = np.empty((n, 2), dtype=np.int64)
    links[order, 0] = np.arange(n)   # position of pair k's signal after sorting
    links[:, 1] = np.arange(n)
    return PairEventBatch(signal, idler, links)


def generate_background(rate: float, duration: int, origin: Origin,
                        comb: SpectralCombModel, seed: int,
                        mode_set: tuple | None = None, shard: int = 0) -> PhotonEvents:
    """Unpaired photons on one arm: Poisson times, comb-distributed detunings."""
    if rate < 0:
        raise InputError("rate must be non-negative")
    if duration <= 0:
        raise InputError("duration must be positive")
    label = f"background.{Origin(origin).name.lower()}"
    rng_t = stream_rng(seed, label + ".times", shard)
    rng_m = stream_rng(seed, label + ".modes", shard)
    times = _poisson_times(rate, duration, rng_t)
    if times.size == 0:
        return PhotonEvents.empty(origin)
    modes, detuning = sample_mode_frequency(comb, rng_m, size=times.size, mode_set=mode_set)
    return PhotonEvents(times, detuning, modes, origin, validate=False)
