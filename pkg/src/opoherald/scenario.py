"""Scenario configuration, validation, and the end-to-end pipeline.

A scenario describes one run: source operating point, the optics of the two
arms, optional ion stage on the signal arm, and an analysis recipe.  Configs
are YAML mappings; validation reports every offending field at once.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .correlate import coincidence_stats, cross_correlate, write_histogram_csv
from .errors import ScenarioValidationError
from .ion import IonParams, SequenceParams, run_ion_experiment
from .model import (EventStream, Origin, PhotonEvents, SourceConfig,
                    SpectralCombModel, PS_PER_S)
from .optics import DetectorSpec, FilterSpec, detection_chain
from .source import generate_background, generate_pair_events
from .tagio import write_tags


@dataclass(frozen=True)
class ArmConfig:
    """Optics and detection of one arm (``signal`` = atom side, ``idler`` =
    herald side)."""

    channel: int
    losses: dict = field(default_factory=dict)
    filters: tuple = ()
    detector: DetectorSpec | None = None


@dataclass(frozen=True)
class IonStage:
    """Optional ion experiment fed by the signal arm (after its losses)."""

    params: IonParams
    seq: SequenceParams
    jump_channel: int = 2


@dataclass(frozen=True)
class AnalysisConfig:
    """Cross-correlation recipe: channels, binning, optional peak window."""

    start_channel: int
    stop_channel: int
    bin_width_ps: int
    window_ps: tuple
    peak_window_bins: tuple | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_s: float
    source: SourceConfig
    signal_arm: ArmConfig
    idler_arm: ArmConfig
    ion: IonStage | None = None
    analysis: AnalysisConfig | None = None
    write_tag_files: bool = True

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_s * PS_PER_S))


# ---------------------------------------------------------------------------
# parsing / validation

_FILTER_FIELDS = {"kind", "center_hz", "fwhm_hz", "peak_transmission", "temporal_decay_ps"}


def _build(problems, path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        problems.append(f"{path}: {exc}")
        return None


def _parse_filter(mapping, path, problems) -> FilterSpec | None:
    unknown = set(mapping) - _FILTER_FIELDS
    if unknown:
        problems.append(f"{path}: unknown fields {sorted(unknown)}")
    return _build(problems, path, FilterSpec,
                  kind=mapping.get("kind", "single_lorentzian"),
                  center=float(mapping.get("center_hz", 0.0)),
                  fwhm=float(mapping.get("fwhm_hz", 0.0)),
                  peak_transmission=float(mapping.get("peak_transmission", 1.0)),
                  temporal_decay=float(mapping.get("temporal_decay_ps", 0.0)))


def _parse_arm(mapping, path, problems) -> ArmConfig | None:
    if mapping is None:
        problems.append(f"{path}: missing arm configuration")
        return None
    det = None
    if mapping.get("detector") is not None:
        d = mapping["detector"]
        det = _build(problems, f"{path}.detector", DetectorSpec,
                     efficiency=float(d.get("efficiency", 1.0)),
                     jitter_sigma=float(d.get("jitter_sigma_ps", 0.0)),
                     dark_rate=float(d.get("dark_rate_per_s", 0.0)),
                     dead_time=float(d.get("dead_time_ps", 0.0)))
    filters = tuple(f for i, fm in enumerate(mapping.get("filters", []) or [])
                    if (f := _parse_filter(fm, f"{path}.filters[{i}]", problems)) is not None)
    if "channel" not in mapping:
        problems.append(f"{path}.channel: required")
        return None
    losses = {str(k): float(v) for k, v in (mapping.get("losses") or {}).items()}
    for k, v in losses.items():
        if not 0.0 <= v <= 1.0:
            problems.append(f"{path}.losses.{k}: {v} outside [0, 1]")
    return ArmConfig(channel=int(mapping["channel"]), losses=losses,
                     filters=filters, detector=det)


def scenario_from_mapping(mapping: dict) -> Scenario:
    """Build and validate a scenario; collects every problem before raising."""
    problems: list = []
    if not isinstance(mapping, dict):
        raise ScenarioValidationError(["top level must be a mapping"])
    name = str(mapping.get("name", "scenario"))
    seed = int(mapping.get("seed", 0))
    duration_s = float(mapping.get("duration_s", 0.0))
    if duration_s <= 0:
        problems.append("duration_s: must be positive")

    src_map = mapping.get("source") or {}
    comb_map = src_map.get("comb") or {}
    comb = _build(problems, "source.comb", SpectralCombModel,
                  fsr=comb_map.get("fsr_hz"),
                  mode_fwhm=float(comb_map.get("mode_fwhm_hz", 7.2e6)),
                  envelope_fwhm=float(comb_map.get("envelope_fwhm_hz", 275e9)),
                  round_trip_time=comb_map.get("round_trip_time_ps"),
                  cavity_decay_time=float(comb_map.get("cavity_decay_time_ps", 22700.0)),
                  center_offset=float(comb_map.get("center_offset_hz", 0.0)),
                  jitter_fwhm=float(comb_map.get("jitter_fwhm_hz", 4e6)))
    mode_set = src_map.get("mode_set")
    source = None
    if comb is not None:
        source = _build(problems, "source", SourceConfig,
                        pair_rate=float(src_map.get("pair_rate_per_s", 0.0)),
                        background_signal_rate=float(src_map.get("background_signal_rate_per_s", 0.0)),
                        background_idler_rate=float(src_map.get("background_idler_rate_per_s", 0.0)),
                        pump_power_mw=float(src_map.get("pump_power_mw", 300.0)),
                        comb=comb, seed=seed,
                        mode_set=tuple(mode_set) if mode_set is not None else None)

    signal_arm = _parse_arm(mapping.get("signal_arm"), "signal_arm", problems)
    idler_arm = _parse_arm(mapping.get("idler_arm"), "idler_arm", problems)

    ion = None
    if mapping.get("ion") is not None:
        im = mapping["ion"]
        params = _build(problems, "ion.params", IonParams,
                        tau_sp=float(im.get("tau_sp_s", 1.17)),
                        branching_to_ground=float(im.get("branching_to_ground", 0.94)),
                        natural_fwhm=float(im.get("natural_fwhm_hz", 23e6)),
                        p_abs_resonant=float(im.get("p_abs_resonant", 2e-3)),
                        detuning=float(im.get("detuning_hz", 0.0)),
                        fluorescence_detection_rate=float(im.get("fluorescence_detection_rate_per_s", 2.33e5)),
                        photon_fwhm=float(im.get("photon_fwhm_hz",
                                                  (comb.mode_fwhm + comb.jitter_fwhm) if comb else 11.2e6)))
        seq = _build(problems, "ion.sequence", SequenceParams,
                     prep_duration=float(im.get("prep_duration_us", 71.0)),
                     prep_success=float(im.get("prep_success", 0.9999)),
                     exposure=float(im.get("exposure_ms", 7.0)),
                     dead_overhead=float(im.get("dead_overhead_us", 1800.0)))
        if params is not None and seq is not None:
            ion = IonStage(params, seq, jump_channel=int(im.get("jump_channel", 2)))

    analysis = None
    if mapping.get("analysis") is not None:
        am = mapping["analysis"]
        window = am.get("window_ps", None)
        if not (isinstance(window, (list, tuple)) and len(window) == 2):
            problems.append("analysis.window_ps: need [min_delay, max_delay]")
            window = (0, 1)
        peak = am.get("peak_window_bins")
        analysis = AnalysisConfig(start_channel=int(am.get("start_channel", 1)),
                                  stop_channel=int(am.get("stop_channel", 0)),
                                  bin_width_ps=int(am.get("bin_width_ps", 100)),
                                  window_ps=(int(window[0]), int(window[1])),
                                  peak_window_bins=tuple(peak) if peak else None)

    # channel bookkeeping
    declared = [a.channel for a in (signal_arm, idler_arm) if a is not None]
    if ion is not None:
        declared.append(ion.jump_channel)
    if len(set(declared)) != len(declared):
        problems.append("channels: each channel must be declared exactly once")
    if analysis is not None:
        for role, ch in (("start", analysis.start_channel), ("stop", analysis.stop_channel)):
            if ch not in declared:
                problems.append(f"analysis.{role}_channel: {ch} is not a declared channel")

    if problems:
        raise ScenarioValidationError(problems)
    return Scenario(name=name, seed=seed, duration_s=duration_s, source=source,
                    signal_arm=signal_arm, idler_arm=idler_arm, ion=ion,
                    analysis=analysis,
                    write_tag_files=bool(mapping.get("write_tag_files", True)))


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        return scenario_from_mapping(yaml.safe_load(f))


def scenario_to_mapping(s: Scenario) -> dict:
    """Inverse of :func:`scenario_from_mapping` (semantic round trip)."""
    def arm(a: ArmConfig) -> dict:
        out: dict = {"channel": a.channel, "losses": dict(a.losses)}
        out["filters"] = [{"kind": f.kind, "center_hz": f.center, "fwhm_hz": f.fwhm,
                           "peak_transmission": f.peak_transmission,
                           "temporal_decay_ps": f.temporal_decay} for f in a.filters]
        if a.detector is not None:
            d = a.detector
            out["detector"] = {"efficiency": d.efficiency, "jitter_sigma_ps": d.jitter_sigma,
                               "dark_rate_per_s": d.dark_rate, "dead_time_ps": d.dead_time}
        return out

    c = s.source.comb
    mapping: dict = {
        "name": s.name, "seed": s.seed, "duration_s": s.duration_s,
        "source": {
            "pair_rate_per_s": s.source.pair_rate,
            "background_signal_rate_per_s": s.source.background_signal_rate,
            "background_idler_rate_per_s": s.source.background_idler_rate,
            "pump_power_mw": s.source.pump_power_mw,
            "comb": {"round_trip_time_ps": c.round_trip_time, "mode_fwhm_hz": c.mode_fwhm,
                     "envelope_fwhm_hz": c.envelope_fwhm,
                     "cavity_decay_time_ps": c.cavity_decay_time,
                     "center_offset_hz": c.center_offset, "jitter_fwhm_hz": c.jitter_fwhm},
        },
        "signal_arm": arm(s.signal_arm),
        "idler_arm": arm(s.idler_arm),
        "write_tag_files": s.write_tag_files,
    }
    if s.source.mode_set is not None:
        mapping["source"]["mode_set"] = list(s.source.mode_set)
    if s.ion is not None:
        p, q = s.ion.params, s.ion.seq
        mapping["ion"] = {
            "tau_sp_s": p.tau_sp, "branching_to_ground": p.branching_to_ground,
            "natural_fwhm_hz": p.natural_fwhm, "p_abs_resonant": p.p_abs_resonant,
            "detuning_hz": p.detuning,
            "fluorescence_detection_rate_per_s": p.fluorescence_detection_rate,
            "photon_fwhm_hz": p.photon_fwhm,
            "prep_duration_us": q.prep_duration, "prep_success": q.prep_success,
            "exposure_ms": q.exposure, "dead_overhead_us": q.dead_overhead,
            "jump_channel": s.ion.jump_channel,
        }
    if s.analysis is not None:
        a = s.analysis
        mapping["analysis"] = {"start_channel": a.start_channel, "stop_channel": a.stop_channel,
                               "bin_width_ps": a.bin_width_ps, "window_ps": list(a.window_ps)}
        if a.peak_window_bins:
            mapping["analysis"]["peak_window_bins"] = list(a.peak_window_bins)
    return mapping


# ---------------------------------------------------------------------------
# execution


def _merge_photons(a: PhotonEvents, b: PhotonEvents) -> PhotonEvents:
    if len(b) == 0:
        return a
    if len(a) == 0:
        return b
    times = np.concatenate([a.times, b.times])
    order = np.argsort(times, kind="stable")
    return PhotonEvents(times[order],
                        np.concatenate([a.detunings, b.detunings])[order],
                        np.concatenate([a.mode_indices, b.mode_indices])[order],
                        a.origin, validate=False)


def config_hash(s: Scenario) -> str:
    blob = json.dumps(scenario_to_mapping(s), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def run_scenario(s: Scenario, out_dir) -> dict:
    """Execute generation -> optics -> detection (-> ion) -> analysis.

    Writes tag files, histogram CSVs, and stats reports into ``out_dir`` and
    returns the manifest (also written as ``manifest.json``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    duration = s.duration_ps
    artifacts: list = []

    batch = generate_pair_events(s.source, duration)
    signal = _merge_photons(batch.signal_events, generate_background(
        s.source.background_signal_rate, duration, Origin.BACKGROUND_SIGNAL_ARM,
        s.source.comb, s.source.seed, mode_set=s.source.mode_set))
    idler = _merge_photons(batch.idler_events, generate_background(
        s.source.background_idler_rate, duration, Origin.BACKGROUND_IDLER_ARM,
        s.source.comb, s.source.seed, mode_set=s.source.mode_set))

    streams: dict = {}
    idler_stream = detection_chain(idler, losses=s.idler_arm.losses,
                                   filters=s.idler_arm.filters,
                                   detector=s.idler_arm.detector, duration=duration,
                                   seed=s.seed, arm="idler", channel=s.idler_arm.channel)
    streams[s.idler_arm.channel] = idler_stream

    results: dict = {"idler_rate_per_s": idler_stream.rate()}
    if s.ion is not None:
        from .rng import stream_rng

        at_trap = signal
        for name, eta in s.signal_arm.losses.items():
            from .optics import apply_loss

            at_trap = apply_loss(at_trap, eta, stream_rng(s.seed, f"signal.loss.{name}"))
        run = run_ion_experiment(at_trap, duration, s.ion.seq, s.ion.params,
                                 stream_rng(s.seed, "ion"))
        jump_stream = EventStream(run.jump_detection_times,
                                  np.full(run.n_jumps, s.ion.jump_channel, np.uint16),
                                  frozenset({s.ion.jump_channel}), duration, validate=False)
        streams[s.ion.jump_channel] = jump_stream
        results.update(jump_rate_per_s=run.jump_rate(duration), n_cycles=run.n_cycles,
                       n_jumps=run.n_jumps)
    else:
        signal_stream = detection_chain(signal, losses=s.signal_arm.losses,
                                        filters=s.signal_arm.filters,
                                        detector=s.signal_arm.detector, duration=duration,
                                        seed=s.seed, arm="signal",
                                        channel=s.signal_arm.channel)
        streams[s.signal_arm.channel] = signal_stream
        results["signal_rate_per_s"] = signal_stream.rate()

    if s.write_tag_files:
        for ch, stream in sorted(streams.items()):
            path = out / f"{s.name}_ch{ch}.qtt"
            write_tags(stream, path)
            artifacts.append({"path": path.name, "kind": "tags", "channel": ch,
                              "n_records": len(stream)})

    if s.analysis is not None:
        a = s.analysis
        h = cross_correlate(streams[a.start_channel], streams[a.stop_channel],
                            a.bin_width_ps, a.window_ps, total_time=s.duration_s)
        hist_path = out / f"{s.name}_correlation.csv"
        write_histogram_csv(h, hist_path)
        artifacts.append({"path": hist_path.name, "kind": "histogram"})
        if a.peak_window_bins is not None:
            stats = coincidence_stats(h, a.peak_window_bins)
            results.update(peak_rate_C=stats.peak_rate_C,
                           background_per_bin_rate_BG=stats.background_per_bin_rate_BG,
                           snr=stats.snr)

    manifest = {"name": s.name, "seed": s.seed, "config_sha256": config_hash(s),
                "duration_s": s.duration_s, "results": results, "outputs": artifacts}
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest
