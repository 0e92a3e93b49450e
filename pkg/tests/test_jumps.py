from __future__ import annotations

import numpy as np

from conftest import RATE, aba_track, click_train
from songcue import dsp
from songcue.audio import Waveform
from songcue.jumps import build_jump_graph
from songcue.tempo import dynamic_tempo, track_beats


def _graph_for(x, threshold=None):
    w = Waveform(x, RATE)
    spec = dsp.stft(w)
    m = dsp.mfcc(w)
    env = dsp.onset_strength(w)
    curve, _ = dynamic_tempo(env)
    beats = track_beats(env, float(np.median(curve.values)))
    return beats, build_jump_graph(m, spec, beats, threshold=threshold)


def test_repeated_section_links_across_the_track():
    beats, graph = _graph_for(aba_track())
    assert graph.unique_pairs() > 0
    cross = 0
    for i, targets in graph.candidates.items():
        for j in targets:
            a, b = sorted((beats[i], beats[j]))
            if a < 7.0 * RATE and b >= 17.0 * RATE:
                cross += 1
    # the first and third sections are identical, so links must span them
    assert cross > 0


def test_nonrepetitive_noise_has_no_candidates():
    n = int(24.0 * RATE)
    x = click_train(n, RATE, 120.0, 0.35)
    x += 0.3 * np.random.default_rng(3).standard_normal(n)
    _, graph = _graph_for(x)
    assert graph.unique_pairs() == 0


def test_min_separation_and_symmetry():
    _, graph = _graph_for(aba_track())
    for i, targets in graph.candidates.items():
        assert sorted(targets) == list(targets)
        for j in targets:
            assert abs(i - j) >= 4
            assert i in graph.candidates[j]
    assert graph.total_candidates() == 2 * graph.unique_pairs()


def test_explicit_zero_threshold_empties_the_graph():
    _, graph = _graph_for(aba_track(), threshold=0.0)
    assert graph.total_candidates() == 0


def test_too_few_beats_gives_empty_graph():
    w = Waveform(np.zeros(RATE), RATE)
    graph = build_jump_graph(dsp.mfcc(w), dsp.stft(w),
                             np.array([0], dtype=np.int64))
    assert graph.n_beats == 1 and graph.candidates == {}
