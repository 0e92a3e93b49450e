from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile

from conftest import RATE, chord
from songcue.audio import AudioTrack, Waveform, content_hash, load_wav, save_wav
from songcue.dsp import stft


def test_waveform_shapes():
    w = Waveform(np.zeros(100), 22050)
    assert w.channels == 1 and w.n_samples == 100
    s = Waveform(np.zeros((50, 2)), 22050)
    assert s.channels == 2
    assert s.duration == pytest.approx(50 / 22050)


def test_waveform_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Waveform(np.zeros((10, 3)), 22050)
    with pytest.raises(ValueError):
        Waveform(np.zeros((2, 2, 2)), 22050)
    with pytest.raises(ValueError):
        Waveform(np.zeros(10), 0)


def test_to_mono_averages_channels():
    data = np.stack([np.ones(64), -np.ones(64)], axis=1)
    m = Waveform(data, 22050).to_mono()
    assert m.channels == 1
    assert np.allclose(m.samples, 0.0)


def test_float32_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    x = np.clip(rng.standard_normal(4096) * 0.3, -1, 1)
    p = tmp_path / "a.wav"
    save_wav(p, Waveform(x, RATE), dtype="float32")
    w = load_wav(p)
    assert w.sample_rate == RATE
    assert np.array_equal(w.samples, x.astype(np.float32).astype(np.float64))


def test_int16_roundtrip(tmp_path):
    x = 0.5 * np.sin(2 * np.pi * 440 * np.arange(2048) / RATE)
    p = tmp_path / "b.wav"
    save_wav(p, Waveform(x, RATE), dtype="int16")
    w = load_wav(p)
    # int16 quantization error is bounded by one step
    assert np.max(np.abs(w.samples - x)) < 1.0 / 32767 + 1e-9


def test_stereo_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    x = np.clip(rng.standard_normal((1000, 2)) * 0.2, -1, 1)
    p = tmp_path / "c.wav"
    save_wav(p, Waveform(x, 44100), dtype="float32")
    w = load_wav(p)
    assert w.samples.shape == (1000, 2) and w.sample_rate == 44100


def test_load_rejects_many_channels(tmp_path):
    p = tmp_path / "d.wav"
    wavfile.write(p, 22050, np.zeros((100, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        load_wav(p)


def test_resample_halves_length_and_keeps_pitch():
    n = 44100
    x = np.sin(2 * np.pi * 440 * np.arange(n) / 44100)
    w = Waveform(x, 44100).resample(22050)
    assert abs(w.n_samples - n // 2) <= 1
    spec = stft(w)
    bin_at = int(np.argmax(spec.magnitudes[spec.n_frames // 2]))
    assert abs(bin_at - round(440 * 2048 / 22050)) <= 1


def test_content_hash_tracks_bytes(tmp_path):
    p = tmp_path / "e.wav"
    save_wav(p, Waveform(np.zeros(256), RATE), dtype="float32")
    h1 = content_hash(p)
    assert h1 == content_hash(p)
    save_wav(p, Waveform(np.ones(256) * 0.1, RATE), dtype="float32")
    assert content_hash(p) != h1


def test_audiotrack_load_and_analysis(tmp_path):
    x = chord(44100, 44100, (330.0,), 0.4)
    p = tmp_path / "f.wav"
    save_wav(p, Waveform(np.stack([x, x], axis=1), 44100), dtype="float32")
    tr = AudioTrack.load(p)
    assert tr.track_hash == content_hash(p)
    aw = tr.analysis_waveform()
    assert aw.sample_rate == 22050 and aw.channels == 1
