"""Frame-based signal operations shared by every analysis and editing stage.

All transforms use a fixed framing convention: frame t covers samples
[t*hop, t*hop + frame_length), the tail frame is zero-padded, and the
window is a symmetric raised cosine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.ndimage import median_filter
from scipy.signal import butter, filtfilt
from scipy.signal import resample as _fft_resample

EPS = 1e-12
LOG_FLOOR = 1e-10
# magnitude floor for onset flux, ~-60 dBFS in impulse-magnitude units
ONSET_FLOOR = 1e-3

FRAME_LENGTH = 2048
HOP_LENGTH = 512


# ----- Containers -----

@dataclass
class Spectrogram:
    """Magnitude spectrogram, shape (n_frames, n_bins) with n_bins = frame//2 + 1."""

    magnitudes: np.ndarray
    sample_rate: int
    frame_length: int
    hop_length: int

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate / self.frame_length

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length


@dataclass
class Envelope:
    """Per-frame scalar series on the same hop grid as the spectrogram it came from."""

    values: np.ndarray
    sample_rate: int
    hop_length: int

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop_length / self.sample_rate


@dataclass
class MFCCMatrix:
    """Cepstral coefficients, shape (n_frames, n_coeffs)."""

    coeffs: np.ndarray
    sample_rate: int
    hop_length: int

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]


# ----- Framing and transforms -----

def _n_frames(n_samples: int, frame_length: int, hop_length: int) -> int:
    if n_samples <= frame_length:
        return 1
    return 1 + int(np.ceil((n_samples - frame_length) / hop_length))


def _frame_signal(x: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"mono signal required, got shape {x.shape}")
    n_frames = _n_frames(x.shape[0], frame_length, hop_length)
    padded_len = (n_frames - 1) * hop_length + frame_length
    if padded_len > x.shape[0]:
        x = np.concatenate([x, np.zeros(padded_len - x.shape[0])])
    return sliding_window_view(x, frame_length)[::hop_length].copy()


def stft_complex(x: np.ndarray, frame_length: int = FRAME_LENGTH,
                 hop_length: int = HOP_LENGTH) -> np.ndarray:
    """Complex STFT, shape (n_frames, frame//2 + 1), symmetric raised-cosine window."""
    frames = _frame_signal(x, frame_length, hop_length)
    window = np.hanning(frame_length)
    return np.fft.rfft(frames * window, axis=1)


def istft(spec: np.ndarray, frame_length: int = FRAME_LENGTH,
          hop_length: int = HOP_LENGTH, length: int | None = None) -> np.ndarray:
    """Overlap-add inverse with synthesis-window compensation (division by sum of w^2)."""
    spec = np.asarray(spec)
    n_frames = spec.shape[0]
    window = np.hanning(frame_length)
    frames = np.fft.irfft(spec, n=frame_length, axis=1) * window
    out_len = (n_frames - 1) * hop_length + frame_length
    y = np.zeros(out_len)
    wsum = np.zeros(out_len)
    for t in range(n_frames):
        start = t * hop_length
        y[start:start + frame_length] += frames[t]
        wsum[start:start + frame_length] += window * window
    good = wsum > EPS
    y[good] /= wsum[good]
    if length is not None:
        if length <= out_len:
            y = y[:length]
        else:
            y = np.concatenate([y, np.zeros(length - out_len)])
    return y


def _mono_samples(w) -> tuple[np.ndarray, int]:
    from .audio import Waveform
    if not isinstance(w, Waveform):
        raise TypeError(f"expected a Waveform, got {type(w).__name__}")
    return w.to_mono().samples, w.sample_rate


def stft(w, frame_length: int = FRAME_LENGTH, hop_length: int = HOP_LENGTH) -> Spectrogram:
    """Magnitude spectrogram of a waveform (mono; stereo is downmixed first)."""
    x, rate = _mono_samples(w)
    mags = np.abs(stft_complex(x, frame_length, hop_length))
    return Spectrogram(mags, rate, frame_length, hop_length)


# ----- Mel cepstra -----

def _hz_to_mel(f: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, frame_length: int, n_mels: int) -> np.ndarray:
    """Triangular filters spanning 0 Hz to sample_rate/2, rows normalized to unit sum."""
    n_bins = frame_length // 2 + 1
    bin_freqs = np.arange(n_bins) * sample_rate / frame_length
    mel_points = np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_mels + 2)
    hz_points = _mel_to_hz(mel_points)
    fb = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        lo, mid, hi = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        up = (bin_freqs - lo) / max(mid - lo, EPS)
        down = (hi - bin_freqs) / max(hi - mid, EPS)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
        s = fb[i].sum()
        if s > EPS:
            fb[i] /= s
    return fb


def mfcc_from_magnitudes(mags: np.ndarray, sample_rate: int, frame_length: int,
                         hop_length: int, n_mels: int = 40,
                         n_coeffs: int = 13) -> MFCCMatrix:
    fb = mel_filterbank(sample_rate, frame_length, n_mels)
    mel = mags @ fb.T
    logmel = np.log(mel + LOG_FLOOR)
    cep = dct(logmel, type=2, norm="ortho", axis=1)[:, :n_coeffs]
    return MFCCMatrix(cep, sample_rate, hop_length)


def mfcc(w, n_mels: int = 40, n_coeffs: int = 13,
         frame_length: int = FRAME_LENGTH, hop_length: int = HOP_LENGTH) -> MFCCMatrix:
    """MFCCs from log-mel magnitudes (DCT-II, orthonormal)."""
    spec = stft(w, frame_length, hop_length)
    return mfcc_from_magnitudes(spec.magnitudes, spec.sample_rate, frame_length,
                                hop_length, n_mels, n_coeffs)


# ----- Onset strength -----

def onset_strength_from_magnitudes(mags: np.ndarray, sample_rate: int,
                                   frame_length: int, hop_length: int) -> Envelope:
    logm = np.log(mags + ONSET_FLOOR)
    flux = np.maximum(0.0, np.diff(logm, axis=0)).sum(axis=1)
    values = np.concatenate([[0.0], flux])
    # new content enters a frame near its trailing edge; shift so that envelope
    # index t refers to audio at sample t*hop
    shift = (frame_length - hop_length) // hop_length
    if shift > 0:
        values = np.concatenate([np.zeros(shift), values])[: mags.shape[0]]
    return Envelope(values, sample_rate, hop_length)


def onset_strength(w, frame_length: int = FRAME_LENGTH,
                   hop_length: int = HOP_LENGTH) -> Envelope:
    """Half-wave-rectified spectral flux of log magnitudes; first frame is 0."""
    spec = stft(w, frame_length, hop_length)
    return onset_strength_from_magnitudes(spec.magnitudes, spec.sample_rate,
                                          frame_length, hop_length)


# ----- Envelopes and smoothing -----

def amplitude_envelope(w, frame_length: int = FRAME_LENGTH,
                       hop_length: int = HOP_LENGTH) -> Envelope:
    """Per-frame RMS on the standard hop grid."""
    x, rate = _mono_samples(w)
    frames = _frame_signal(x, frame_length, hop_length)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    return Envelope(rms, rate, hop_length)


def lowpass_values(values: np.ndarray, frame_rate: float,
                   cutoff_hz: float = 0.25) -> np.ndarray:
    """Second-order zero-phase Butterworth low pass on a frame-rate series."""
    x = np.asarray(values, dtype=np.float64)
    nyquist = frame_rate / 2.0
    if cutoff_hz <= 0 or cutoff_hz >= nyquist:
        raise ValueError(f"cutoff {cutoff_hz} Hz out of range (0, {nyquist})")
    b, a = butter(2, cutoff_hz / nyquist)
    padlen = 3 * max(len(a), len(b))
    if x.shape[0] <= padlen:
        return x.copy()  # too short to filter stably, pass through
    return filtfilt(b, a, x)


def lowpass_smooth(env: Envelope, cutoff_hz: float = 0.25) -> Envelope:
    return Envelope(lowpass_values(env.values, env.frame_rate, cutoff_hz),
                    env.sample_rate, env.hop_length)


# ----- Segment shaping -----

def taper_window(segment: np.ndarray, taper_fraction: float = 0.1) -> np.ndarray:
    """Raised-cosine fade-in/out over taper_fraction of each end; endpoints hit 0."""
    if not 0.0 <= taper_fraction <= 0.5:
        raise ValueError(f"taper_fraction must be in [0, 0.5], got {taper_fraction}")
    x = np.array(segment, dtype=np.float64, copy=True)
    n = x.shape[0]
    n_taper = int(round(n * taper_fraction))
    if n_taper < 1:
        return x
    w = np.hanning(2 * n_taper)
    shape = (n_taper,) + (1,) * (x.ndim - 1)
    x[:n_taper] *= w[:n_taper].reshape(shape)
    x[n - n_taper:] *= w[n_taper:].reshape(shape)
    return x


# ----- Phase-vocoder stretch and shift -----

def _phase_vocoder(spec: np.ndarray, rate: float, frame_length: int,
                   hop_length: int) -> np.ndarray:
    n_frames, n_bins = spec.shape
    steps = np.arange(0.0, n_frames, rate)
    padded = np.vstack([spec, np.zeros((2, n_bins), dtype=spec.dtype)])
    phi_advance = 2.0 * np.pi * hop_length * np.arange(n_bins) / frame_length
    out = np.empty((len(steps), n_bins), dtype=np.complex128)
    phase_acc = np.angle(padded[0])
    for t, s in enumerate(steps):
        i = int(s)
        frac = s - i
        mag = (1.0 - frac) * np.abs(padded[i]) + frac * np.abs(padded[i + 1])
        out[t] = mag * np.exp(1j * phase_acc)
        dphi = np.angle(padded[i + 1]) - np.angle(padded[i]) - phi_advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase_acc = phase_acc + phi_advance + dphi
    return out


def time_stretch(segment: np.ndarray, rate: float,
                 frame_length: int = FRAME_LENGTH,
                 hop_length: int = HOP_LENGTH) -> np.ndarray:
    """Phase-vocoder stretch: output length == round(len(segment)/rate)."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("time_stretch expects a mono segment")
    n = x.shape[0]
    target = int(round(n / rate))
    if n == 0 or target == 0:
        return np.zeros(max(target, 0))
    # padding keeps the interior exact at rate 1.0 and kills edge fade
    pad = frame_length
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + hop_length)])
    stretched = _phase_vocoder(stft_complex(xp, frame_length, hop_length), rate,
                               frame_length, hop_length)
    y = istft(stretched, frame_length, hop_length)
    lead = int(round(pad / rate))
    y = y[lead:lead + target]
    if y.shape[0] < target:
        y = np.concatenate([y, np.zeros(target - y.shape[0])])
    return y


def pitch_shift(segment: np.ndarray, semitones: float,
                frame_length: int = FRAME_LENGTH,
                hop_length: int = HOP_LENGTH) -> np.ndarray:
    """Stretch by 2^(semitones/12) then resample back: same length, shifted pitch."""
    if abs(semitones) > 12:
        raise ValueError(f"|semitones| must be <= 12, got {semitones}")
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("pitch_shift expects a mono segment")
    if semitones == 0 or x.shape[0] == 0:
        return x.copy()
    factor = 2.0 ** (semitones / 12.0)
    stretched = time_stretch(x, 1.0 / factor, frame_length, hop_length)
    return np.asarray(_fft_resample(stretched, x.shape[0]), dtype=np.float64)


# ----- Harmonic-percussive separation -----

def hpss_masks(mags: np.ndarray, kernel: int = 17, power: float = 2.0):
    """Median-filter masks: harmonic is median-enhanced along time, percussive along frequency."""
    harm = median_filter(mags, size=(kernel, 1), mode="reflect")
    perc = median_filter(mags, size=(1, kernel), mode="reflect")
    hp = harm ** power
    pp = perc ** power
    denom = hp + pp
    zero = denom <= EPS
    denom[zero] = 1.0
    mask_h = hp / denom
    mask_p = pp / denom
    mask_h[zero] = 0.0
    mask_p[zero] = 0.0
    return mask_h, mask_p


def hpss(w, kernel: int = 17, power: float = 2.0,
         frame_length: int = FRAME_LENGTH, hop_length: int = HOP_LENGTH):
    """Split a waveform into (harmonic, percussive) via soft spectral masks."""
    from .audio import Waveform
    x, rate = _mono_samples(w)
    n = x.shape[0]
    # pad so the overlap-add normalization stays well conditioned at both edges;
    # masked frames no longer agree in the overlap, so a thin window sum there
    # would amplify the disagreement into an edge transient
    pad = frame_length
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    spec = stft_complex(xp, frame_length, hop_length)
    mask_h, mask_p = hpss_masks(np.abs(spec), kernel, power)
    h = istft(spec * mask_h, frame_length, hop_length)[pad:pad + n]
    p = istft(spec * mask_p, frame_length, hop_length)[pad:pad + n]
    if h.shape[0] < n:
        h = np.concatenate([h, np.zeros(n - h.shape[0])])
        p = np.concatenate([p, np.zeros(n - p.shape[0])])
    return Waveform(h, rate), Waveform(p, rate)
