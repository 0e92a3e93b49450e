"""Waveform container, PCM WAV I/O, and rate/channel conversion."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

ANALYSIS_RATE = 22050


def _as_float_samples(samples: np.ndarray) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        return x
    if x.ndim == 2 and x.shape[1] in (1, 2):
        return x[:, 0] if x.shape[1] == 1 else x
    raise ValueError(f"samples must be (n,) or (n, 2), got shape {x.shape}")


@dataclass
class Waveform:
    """Float64 audio in [-1, 1]: shape (n,) mono or (n, 2) stereo."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = _as_float_samples(self.samples)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def to_mono(self) -> "Waveform":
        if self.channels == 1:
            return self
        return Waveform(self.samples.mean(axis=1), self.sample_rate)

    def resample(self, rate: int) -> "Waveform":
        if rate == self.sample_rate:
            return self
        g = gcd(rate, self.sample_rate)
        x = self.samples if self.samples.ndim > 1 else self.samples[:, None]
        y = resample_poly(x, rate // g, self.sample_rate // g, axis=0)
        y = y[:, 0] if self.channels == 1 else y
        return Waveform(np.clip(y, -1.0, 1.0), rate)


def load_wav(path: str | Path) -> Waveform:
    """Read a 16-bit integer or 32-bit float PCM WAV file."""
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise ValueError(f"unsupported WAV sample format: {data.dtype}")
    if samples.ndim == 2 and samples.shape[1] > 2:
        raise ValueError(f"only mono or stereo supported, got {samples.shape[1]} channels")
    return Waveform(samples, int(rate))


def save_wav(path: str | Path, wav: Waveform, dtype: str = "float32") -> None:
    """Write PCM WAV: dtype 'float32' or 'int16'."""
    x = np.clip(wav.samples, -1.0, 1.0)
    if dtype == "float32":
        wavfile.write(str(path), wav.sample_rate, x.astype(np.float32))
    elif dtype == "int16":
        wavfile.write(str(path), wav.sample_rate, np.round(x * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"dtype must be 'float32' or 'int16', got {dtype!r}")


def content_hash(path: str | Path) -> str:
    """SHA-256 of the raw file bytes, used to key analysis profiles."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class AudioTrack:
    """A playlist entry: source file plus optional metadata tags."""

    path: Path
    waveform: Waveform
    genre_keyword: str | None = None
    track_hash: str = field(default="")

    @classmethod
    def load(cls, path: str | Path, genre_keyword: str | None = None) -> "AudioTrack":
        p = Path(path)
        return cls(path=p, waveform=load_wav(p), genre_keyword=genre_keyword,
                   track_hash=content_hash(p))

    def analysis_waveform(self) -> Waveform:
        """Mono 22050 Hz view used by every feature extractor."""
        return self.waveform.to_mono().resample(ANALYSIS_RATE)
