from __future__ import annotations

import numpy as np

from conftest import RATE, texture
from songcue import dsp
from songcue.audio import Waveform
from songcue.segmentation import segment_bounds


def _bounds_for(x, **kw):
    m = dsp.mfcc(Waveform(x, RATE))
    return segment_bounds(m, len(x) / RATE, **kw)


def test_two_textures_split_at_the_seam():
    half = 30 * RATE
    x = np.concatenate([texture("low", half), texture("high", half)])
    bounds = _bounds_for(x)
    assert bounds[0] == 0
    interior = bounds[1:] / RATE
    assert len(interior) >= 1
    assert np.min(np.abs(interior - 30.0)) <= 1.0


def test_three_textures_split_at_both_seams():
    third = 30 * RATE
    x = np.concatenate([texture("low", third), texture("noise", third),
                        texture("high", third)])
    interior = _bounds_for(x)[1:] / RATE
    for seam in (30.0, 60.0):
        assert np.min(np.abs(interior - seam)) <= 1.0


def test_short_track_is_one_segment():
    assert list(_bounds_for(texture("low", 8 * RATE))) == [0]


def test_bounds_start_at_zero_and_respect_min_gap():
    x = np.concatenate([texture("low", 20 * RATE), texture("high", 20 * RATE)])
    bounds = _bounds_for(x, n_segments=6)
    assert bounds[0] == 0
    assert np.all(np.diff(bounds) >= 5.0 * RATE - RATE // 2)
