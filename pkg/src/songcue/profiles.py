"""Per-track analysis profiles: the extraction pipeline and the sidecar store."""

from __future__ import annotations

import base64
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from . import dsp, segmentation, tempo
from .audio import ANALYSIS_RATE, AudioTrack, Waveform
from .curves import CurveSet, build_curves
from .excerpts import (ALERT_LENGTH_S, OVERLAY_DURATION_S, Excerpt,
                       select_alert_segment, select_overlay)
from .genres import (AutoSortThresholds, GenreCategory, RhythmStats,
                     categorize, classify_keyword)
from .jumps import JumpGraph, build_jump_graph

SCHEMA_VERSION = 1
PROFILE_SUFFIX = ".profile.json"


@dataclass
class AnalysisParams:
    """Every knob the preprocessing pipeline reads; the snapshot keys the cache."""

    analysis_rate: int = ANALYSIS_RATE
    frame_length: int = dsp.FRAME_LENGTH
    hop_length: int = dsp.HOP_LENGTH
    n_mels: int = 40
    n_mfcc: int = 13
    smoothing_cutoff_hz: float = 0.25
    tempo_window_s: float = tempo.TEMPO_WINDOW_S
    tempo_hop_s: float = tempo.TEMPO_HOP_S
    bpm_min: float = tempo.BPM_FLOOR
    bpm_max: float = tempo.BPM_CEIL
    beat_tightness: float = tempo.BEAT_TIGHTNESS
    min_segment_s: float = segmentation.MIN_SEGMENT_S
    segment_pool_block_s: float = segmentation.POOL_BLOCK_S
    hpss_kernel: int = 17
    hpss_power: float = 2.0
    jump_min_separation: int = 4
    jump_threshold_fraction: float = 0.2
    jump_threshold: float | None = None
    overlay_duration_s: float = OVERLAY_DURATION_S
    alert_length_s: float = ALERT_LENGTH_S
    delay_range: tuple[float, float] = (0.15, 0.60)
    echo_amp_range: tuple[float, float] = (0.4, 0.9)
    rate_range: tuple[float, float] = (1.05, 1.25)
    autosort: AutoSortThresholds = field(default_factory=AutoSortThresholds)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["delay_range"] = list(d["delay_range"])
        d["echo_amp_range"] = list(d["echo_amp_range"])
        d["rate_range"] = list(d["rate_range"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisParams":
        d = dict(d)
        auto = d.pop("autosort", {})
        for key in ("delay_range", "echo_amp_range", "rate_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d, autosort=AutoSortThresholds(**auto))


@dataclass
class AnalysisProfile:
    """Everything a planner needs at stream time, on the analysis timeline."""

    schema_version: int
    track_hash: str
    params: dict
    category: GenreCategory
    keyword: str | None
    sample_rate: int
    hop_length: int
    n_samples: int
    flags: list[str]
    segment_bounds: np.ndarray | None
    beats: np.ndarray | None
    curves: CurveSet | None
    jump_graph: JumpGraph | None
    overlay: Excerpt | None
    alert: Excerpt | None
    rhythm: RhythmStats | None

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


# ----- Pipeline -----

def _beat_onset_values(env_values: np.ndarray, beats: np.ndarray, hop: int) -> np.ndarray:
    """Peak onset strength near each beat (+-2 frames absorbs grid quantization)."""
    out = np.zeros(len(beats))
    n = len(env_values)
    for k, b in enumerate(np.asarray(beats, dtype=np.int64) // hop):
        lo = max(int(b) - 2, 0)
        hi = min(int(b) + 3, n)
        if lo < hi:
            out[k] = env_values[lo:hi].max()
    return out


def preprocess(track: AudioTrack, keyword: str | None = None, auto: bool = False,
               params: AnalysisParams | None = None) -> AnalysisProfile:
    """Run every extractor the track's category needs and assemble the profile."""
    p = params or AnalysisParams()
    if keyword is None and not auto:
        raise ValueError("either a genre keyword or auto sorting must be requested")

    wav = track.waveform.to_mono().resample(p.analysis_rate)
    x = wav.samples
    spec = dsp.stft(wav, p.frame_length, p.hop_length)
    env = dsp.onset_strength_from_magnitudes(spec.magnitudes, p.analysis_rate,
                                             p.frame_length, p.hop_length)
    mfcc_mat = dsp.mfcc_from_magnitudes(spec.magnitudes, p.analysis_rate,
                                        p.frame_length, p.hop_length,
                                        p.n_mels, p.n_mfcc)
    flags: list[str] = []

    tempo_curve, tempo_flags = tempo.dynamic_tempo(
        env, p.tempo_window_s, p.tempo_hop_s, (p.bpm_min, p.bpm_max),
        p.smoothing_cutoff_hz)
    flags.extend(tempo_flags)
    beats = tempo.track_beats(env, float(np.median(tempo_curve.values)),
                              p.beat_tightness)
    if len(beats) == 0:
        flags.append("no_beats")

    amp_env = dsp.amplitude_envelope(wav, p.frame_length, p.hop_length)
    amp_smooth = dsp.lowpass_values(amp_env.values, amp_env.frame_rate,
                                    p.smoothing_cutoff_hz)

    bounds = segmentation.segment_bounds(mfcc_mat, wav.duration,
                                         min_segment_s=p.min_segment_s,
                                         pool_block_s=p.segment_pool_block_s)
    if len(bounds) < 2:
        flags.append("single_segment")

    category = classify_keyword(keyword) if keyword is not None else None
    need_hpss = auto or category is GenreCategory.BLUES
    need_jumps = auto or category is GenreCategory.POP

    perc_amp = None
    overlay = None
    perc_env = None
    if need_hpss:
        _, perc = dsp.hpss(wav, p.hpss_kernel, p.hpss_power,
                           p.frame_length, p.hop_length)
        perc_env = dsp.onset_strength(perc, p.frame_length, p.hop_length)
        perc_amp_env = dsp.amplitude_envelope(perc, p.frame_length, p.hop_length)
        perc_amp = dsp.lowpass_values(perc_amp_env.values, perc_amp_env.frame_rate,
                                      p.smoothing_cutoff_hz)
        overlay = select_overlay(perc.samples, p.analysis_rate, beats, perc_env,
                                 p.overlay_duration_s)
        if overlay is None:
            flags.append("no_overlay")

    graph = None
    if need_jumps:
        graph = build_jump_graph(mfcc_mat, spec, beats,
                                 threshold=p.jump_threshold,
                                 min_separation=p.jump_min_separation,
                                 threshold_fraction=p.jump_threshold_fraction)

    rhythm = None
    if auto:
        values = np.asarray(perc_env.values, dtype=np.float64)
        mean = values.mean()
        if len(beats) == 0 or mean <= 1e-8:
            rhythm = RhythmStats(0.0, 0.0, graph.unique_pairs())
        else:
            normalized = _beat_onset_values(values, beats, p.hop_length) / mean
            rhythm = RhythmStats(
                float(np.mean(normalized >= p.autosort.strong_onset)),
                float(np.mean(normalized >= p.autosort.extreme_onset)),
                graph.unique_pairs())
        category = categorize(rhythm, p.autosort)
        # keep only what the decided category's planner consumes
        if category is not GenreCategory.BLUES:
            overlay = None
            perc_amp = None
        if category is not GenreCategory.POP:
            graph = None

    curves = build_curves(tempo_curve.values, amp_smooth, p.analysis_rate,
                          p.hop_length, percussive_amplitude=perc_amp,
                          delay_range=p.delay_range, echo_range=p.echo_amp_range,
                          rate_range=p.rate_range)
    for name in curves.degenerate:
        flags.append(f"degenerate_{name}_curve")

    alert = select_alert_segment(x, p.analysis_rate, bounds, mfcc_mat, spec,
                                 amp_env, p.alert_length_s)
    if alert is None:
        flags.append("no_alert_segment")

    return AnalysisProfile(
        schema_version=SCHEMA_VERSION, track_hash=track.track_hash,
        params=p.snapshot(), category=category, keyword=keyword,
        sample_rate=p.analysis_rate, hop_length=p.hop_length,
        n_samples=wav.n_samples, flags=flags,
        segment_bounds=bounds, beats=beats, curves=curves,
        jump_graph=graph, overlay=overlay, alert=alert, rhythm=rhythm)


def auto_sort(track: AudioTrack,
              thresholds: AutoSortThresholds | None = None,
              params: AnalysisParams | None = None) -> tuple[GenreCategory, RhythmStats]:
    """Classify a track by rhythm strength and repetition alone."""
    profile = preprocess(track, auto=True,
                         params=_with_thresholds(params, thresholds))
    return profile.category, profile.rhythm


def _with_thresholds(params: AnalysisParams | None,
                     thresholds: AutoSortThresholds | None) -> AnalysisParams:
    p = params or AnalysisParams()
    if thresholds is None:
        return p
    d = p.snapshot()
    d.pop("autosort")
    return AnalysisParams(**{k: tuple(v) if k.endswith("_range") else v
                             for k, v in d.items()}, autosort=thresholds)


# ----- Serialization -----

def _encode_array(a: np.ndarray | None, dtype: str = "int64") -> list | None:
    if a is None:
        return None
    if dtype == "int64":
        return [int(v) for v in np.asarray(a, dtype=np.int64)]
    return [float(v) for v in np.asarray(a, dtype=np.float64)]


def _encode_samples(a: np.ndarray) -> str:
    return base64.b64encode(np.asarray(a, dtype="<f4").tobytes()).decode("ascii")


def _decode_samples(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s.encode("ascii")), dtype="<f4").astype(np.float64)


def profile_to_dict(profile: AnalysisProfile) -> dict:
    c = profile.curves
    curves = None
    if c is not None:
        curves = {
            "sample_rate": c.sample_rate, "hop_length": c.hop_length,
            "tempo": _encode_array(c.tempo, "float"),
            "amplitude": _encode_array(c.amplitude, "float"),
            "delay": _encode_array(c.delay, "float"),
            "echo_amp": _encode_array(c.echo_amp, "float"),
            "rate": _encode_array(c.rate, "float"),
            "tempo_min": c.tempo_min, "tempo_max": c.tempo_max,
            "amp_min": c.amp_min, "amp_max": c.amp_max,
            "percussive_amplitude": _encode_array(c.percussive_amplitude, "float"),
            "degenerate": list(c.degenerate),
        }
    graph = None
    if profile.jump_graph is not None:
        graph = {
            "threshold": profile.jump_graph.threshold,
            "n_beats": profile.jump_graph.n_beats,
            "candidates": {str(i): list(j) for i, j in
                           sorted(profile.jump_graph.candidates.items())},
        }

    def excerpt(e: Excerpt | None) -> dict | None:
        if e is None:
            return None
        return {"samples": _encode_samples(e.samples), "sample_rate": e.sample_rate,
                "source_start": int(e.source_start)}

    rhythm = None
    if profile.rhythm is not None:
        rhythm = {"strong_fraction": profile.rhythm.strong_fraction,
                  "extreme_fraction": profile.rhythm.extreme_fraction,
                  "unique_jump_pairs": profile.rhythm.unique_jump_pairs}

    return {
        "schema_version": profile.schema_version,
        "track_hash": profile.track_hash,
        "params": profile.params,
        "category": profile.category.value,
        "keyword": profile.keyword,
        "sample_rate": profile.sample_rate,
        "hop_length": profile.hop_length,
        "n_samples": profile.n_samples,
        "flags": list(profile.flags),
        "segment_bounds": _encode_array(profile.segment_bounds),
        "beats": _encode_array(profile.beats),
        "curves": curves,
        "jump_graph": graph,
        "overlay": excerpt(profile.overlay),
        "alert": excerpt(profile.alert),
        "rhythm": rhythm,
    }


def profile_from_dict(d: dict) -> AnalysisProfile:
    curves = None
    if d.get("curves") is not None:
        c = d["curves"]
        perc = c.get("percussive_amplitude")
        curves = CurveSet(
            sample_rate=c["sample_rate"], hop_length=c["hop_length"],
            tempo=np.asarray(c["tempo"]), amplitude=np.asarray(c["amplitude"]),
            delay=np.asarray(c["delay"]), echo_amp=np.asarray(c["echo_amp"]),
            rate=np.asarray(c["rate"]), tempo_min=c["tempo_min"],
            tempo_max=c["tempo_max"], amp_min=c["amp_min"], amp_max=c["amp_max"],
            percussive_amplitude=None if perc is None else np.asarray(perc),
            degenerate=list(c.get("degenerate", [])))
    graph = None
    if d.get("jump_graph") is not None:
        g = d["jump_graph"]
        graph = JumpGraph({int(i): [int(v) for v in j]
                           for i, j in g["candidates"].items()},
                          g["threshold"], g["n_beats"])

    def excerpt(e: dict | None) -> Excerpt | None:
        if e is None:
            return None
        return Excerpt(_decode_samples(e["samples"]), e["sample_rate"],
                       e["source_start"])

    rhythm = None
    if d.get("rhythm") is not None:
        rhythm = RhythmStats(**d["rhythm"])
    bounds = d.get("segment_bounds")
    beats = d.get("beats")
    return AnalysisProfile(
        schema_version=d["schema_version"], track_hash=d["track_hash"],
        params=d["params"], category=GenreCategory(d["category"]),
        keyword=d.get("keyword"), sample_rate=d["sample_rate"],
        hop_length=d["hop_length"], n_samples=d["n_samples"],
        flags=list(d.get("flags", [])),
        segment_bounds=None if bounds is None else np.asarray(bounds, dtype=np.int64),
        beats=None if beats is None else np.asarray(beats, dtype=np.int64),
        curves=curves, jump_graph=graph,
        overlay=excerpt(d.get("overlay")), alert=excerpt(d.get("alert")),
        rhythm=rhythm)


# ----- Store -----

def profile_path(track_path: str | Path) -> Path:
    p = Path(track_path)
    return p.with_name(p.name + PROFILE_SUFFIX)


def save_profile(profile: AnalysisProfile, path: Path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    payload = json.dumps(profile_to_dict(profile), sort_keys=True,
                         separators=(",", ":"))
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_profile(path: Path, track_hash: str,
                 params: AnalysisParams) -> AnalysisProfile | None:
    """Load a sidecar profile; any mismatch (schema, hash, params) invalidates it."""
    if not path.exists():
        return None
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if d.get("schema_version") != SCHEMA_VERSION:
        return None
    if d.get("track_hash") != track_hash:
        return None
    if d.get("params") != params.snapshot():
        return None
    return profile_from_dict(d)


def ensure_profile(track: AudioTrack, keyword: str | None = None,
                   auto: bool = False, params: AnalysisParams | None = None
                   ) -> tuple[AnalysisProfile, bool]:
    """Return (profile, was_cached). A per-track lock serializes duplicate work."""
    p = params or AnalysisParams()
    path = profile_path(track.path)
    lock = FileLock(str(path) + ".lock")
    with lock:
        cached = load_profile(path, track.track_hash, p)
        if cached is not None and cached.keyword == keyword:
            return cached, True
        profile = preprocess(track, keyword=keyword, auto=auto, params=p)
        save_profile(profile, path)
        return profile, False
