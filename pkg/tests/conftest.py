"""Shared synthetic fixtures.

Every test signal is generated from scratch; nothing binary is bundled.
The synthesizers here are deliberately simple: click trains, chords,
chirps, and tiled noise give precise control over rhythm, repetition,
and texture, which is all the analysis stack keys on.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from songcue.audio import AudioTrack, Waveform, save_wav
from songcue.curves import build_curves
from songcue.engine import SubtletyLevel
from songcue.excerpts import Excerpt
from songcue.genres import GenreCategory
from songcue.jumps import JumpGraph
from songcue.profiles import AnalysisProfile, preprocess

RATE = 22050


def click_train(n, rate, bpm, gain, freq=1800.0, dur=0.02, phase_offset=0.0):
    """Half-window sine bursts on a fixed beat grid."""
    x = np.zeros(n)
    period = 60.0 / bpm * rate
    m = int(dur * rate)
    t = np.arange(m) / rate
    click = np.sin(2 * np.pi * freq * t) * np.hanning(2 * m)[m:]
    s = float(phase_offset)
    while s + m < n:
        x[int(s):int(s) + m] += gain * click
        s += period
    return x


def chord(n, rate, freqs, gain):
    t = np.arange(n) / rate
    x = np.zeros(n)
    for f in freqs:
        x += np.sin(2 * np.pi * f * t)
    return gain * x / max(len(freqs), 1)


def tiled_noise(n, rate, gain, tile_s, seed):
    """Noise bed built from one repeating tile, so content recurs exactly."""
    rng = np.random.default_rng(seed)
    tile = rng.standard_normal(int(tile_s * rate))
    reps = int(np.ceil(n / len(tile)))
    return gain * np.tile(tile, reps)[:n]


def classical_like(duration=40.0, rate=RATE):
    """Sustained chord blocks with a slow amplitude swell and no rhythm."""
    n = int(duration * rate)
    x = np.zeros(n)
    prog = [(220.0, 277.0, 330.0), (196.0, 247.0, 294.0),
            (175.0, 220.0, 262.0), (233.0, 294.0, 349.0)]
    block = int(8.0 * rate)
    for k in range(0, n, block):
        m = min(block, n - k)
        x[k:k + m] = chord(m, rate, prog[(k // block) % len(prog)], 0.4)
    ramp = 0.6 + 0.4 * np.sin(2 * np.pi * np.arange(n) / n)
    return x * ramp


def blues_like(duration=40.0, rate=RATE):
    """Quiet drone under a loud click track: rhythm dominates."""
    n = int(duration * rate)
    return chord(n, rate, (110.0, 165.0), 0.05) + click_train(n, rate, 100.0, 0.9)


def pop_repetitive(duration=40.0, rate=RATE):
    """Alternating two-chord loop plus a repeating noise tile: rhythmic and repetitive."""
    n = int(duration * rate)
    x = np.zeros(n)
    prog = [(262.0, 330.0, 392.0), (220.0, 262.0, 330.0)]
    block = int(2.0 * rate)
    for k in range(0, n, block):
        m = min(block, n - k)
        x[k:k + m] = chord(m, rate, prog[(k // block) % 2], 0.35)
    x += click_train(n, rate, 120.0, 0.35)
    x += tiled_noise(n, rate, 0.10, 4.0, seed=7)
    return x


def jazz_wandering(duration=40.0, rate=RATE):
    """Slow chirp over clicks with fresh noise: rhythmic but never repeats."""
    n = int(duration * rate)
    t = np.arange(n) / rate
    f0 = 180.0 * 2.0 ** (t / duration * 1.5)
    phase = 2 * np.pi * np.cumsum(f0) / rate
    x = 0.18 * (np.sin(phase) + 0.6 * np.sin(1.5 * phase) + 0.4 * np.sin(2.01 * phase))
    x += click_train(n, rate, 120.0, 0.35)
    x += 0.10 * np.random.default_rng(7).standard_normal(n)
    return x


def classical_blocks(duration=40.0, rate=RATE):
    """Chord blocks on a 2 s grid without the swell; easier to splice cleanly."""
    n = int(duration * rate)
    x = np.zeros(n)
    prog = [(220.0, 277.0, 330.0), (196.0, 247.0, 294.0),
            (175.0, 220.0, 262.0), (247.0, 294.0, 370.0)]
    block = int(2.0 * rate)
    for k in range(0, n, block):
        m = min(block, n - k)
        x[k:k + m] = chord(m, rate, prog[(k // block) % len(prog)], 0.4)
    return x


def pop_verse(duration=48.0, rate=RATE, hum=False):
    """Vibrato intro then the repetitive loop; optionally a soft drifting hum.

    The hum period is not commensurate with the 4 s noise tile, so repeats
    are close but never sample-identical.
    """
    n = int(duration * rate)
    t = np.arange(n) / rate
    intro = int(4.0 * rate)
    x = np.zeros(n)
    x[:intro] = 0.35 * np.sin(2 * np.pi * (523.0 + 80.0 * np.sin(2 * np.pi * 0.7 * t[:intro])) * t[:intro])
    prog = [(262.0, 330.0, 392.0), (220.0, 262.0, 330.0)]
    block = int(2.0 * rate)
    for k in range(intro, n, block):
        m = min(block, n - k)
        x[k:k + m] = chord(m, rate, prog[((k - intro) // block) % 2], 0.35)
    x += click_train(n, rate, 120.0, 0.35)
    x[intro:] += tiled_noise(n - intro, rate, 0.10, 4.0, seed=7)
    if hum:
        f_inst = 311.0 + 5.0 * np.sin(2 * np.pi * 0.043 * t)
        x += 0.02 * np.sin(2 * np.pi * np.cumsum(f_inst) / rate)
    return x


def texture(kind, n, rate=RATE):
    if kind == "low":
        return chord(n, rate, (220.0, 277.0, 330.0), 0.4)
    if kind == "high":
        return chord(n, rate, (784.0, 988.0, 1175.0), 0.4)
    return 0.2 * np.random.default_rng(0).standard_normal(n)


def aba_track(rate=RATE):
    """Three 8 s sections, first and last identical, over a steady click grid."""
    n = int(24.0 * rate)
    x = click_train(n, rate, 120.0, 0.35)
    seg = int(8.0 * rate)
    x[:seg] += chord(seg, rate, (220.0, 277.0, 330.0), 0.35)
    x[seg:2 * seg] += chord(seg, rate, (392.0, 494.0, 587.0), 0.35)
    x[2 * seg:] += chord(seg, rate, (220.0, 277.0, 330.0), 0.35)
    return x


def track_of(x, name="track", rate=RATE):
    """In-memory track; the path is metadata only."""
    return AudioTrack(path=Path(f"{name}.wav"), waveform=Waveform(x, rate),
                      track_hash=name)


def write_track(x, path, rate=RATE):
    save_wav(path, Waveform(x, rate), dtype="float32")
    return AudioTrack.load(path)


def toy_profile(category=GenreCategory.CLASSICAL, duration=60.0, rate=RATE,
                with_overlay=True, with_alert=True, with_graph=False):
    """Hand-built profile: beats every 0.5 s, one boundary mid-track.

    Lets engine and server tests pin anchors and payloads exactly without
    running the analysis stack.
    """
    n = int(duration * rate)
    hop = 512
    n_hops = n // hop + 1
    beats = (np.arange(int(duration * 2)) * 0.5 * rate).astype(np.int64)
    beats = beats[beats < n - hop]
    curves = build_curves(np.full(n_hops, 120.0), np.full(n_hops, 0.1), rate, hop)
    overlay = None
    if with_overlay:
        overlay = Excerpt(click_train(int(1.5 * rate), rate, 120.0, 0.8), rate, 0)
    alert = None
    if with_alert:
        t = np.arange(rate) / rate
        alert = Excerpt(0.3 * np.sin(2 * np.pi * 660.0 * t), rate, 0)
    graph = None
    if with_graph:
        cands = {}
        for i in range(len(beats)):
            opts = [j for j in (i - 8, i + 8) if 0 <= j < len(beats)]
            if opts:
                cands[i] = opts
        graph = JumpGraph(candidates=cands, threshold=1.0, n_beats=len(beats))
    return AnalysisProfile(
        schema_version=1, track_hash="toy", params={}, category=category,
        keyword=None, sample_rate=rate, hop_length=hop, n_samples=n,
        flags=[], segment_bounds=np.asarray([0, n // 2], dtype=np.int64),
        beats=beats, curves=curves, jump_graph=graph, overlay=overlay,
        alert=alert, rhythm=None)


def toy_samples(duration=60.0, rate=RATE):
    n = int(duration * rate)
    x = chord(n, rate, (262.0, 330.0), 0.3) + click_train(n, rate, 120.0, 0.35)
    # a whisper of noise keeps sample values unique, as real recordings are
    x += 0.005 * np.random.default_rng(99).standard_normal(n)
    return x


@pytest.fixture(scope="session")
def blues_profile():
    x = blues_like(40.0)
    prof = preprocess(track_of(x, "blues40"), keyword="blues")
    return x, prof


@pytest.fixture(scope="session")
def classical_profile():
    x = classical_blocks(40.0)
    prof = preprocess(track_of(x, "classical40"), keyword="classical")
    return x, prof


@pytest.fixture(scope="session")
def jazz_profile():
    x = jazz_wandering(40.0)
    prof = preprocess(track_of(x, "jazz40"), keyword="jazz")
    return x, prof


@pytest.fixture(scope="session")
def pop_profile():
    x = pop_verse(48.0)
    prof = preprocess(track_of(x, "pop48"), keyword="pop")
    return x, prof


LEVELS = (SubtletyLevel.SUBTLE, SubtletyLevel.NOTICEABLE, SubtletyLevel.URGENT)


# Acceptance tests register one verdict line per criterion; echo them after
# the run so they are visible without -s.
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
