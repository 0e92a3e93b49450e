"""Selection of reusable audio excerpts: percussive overlays and alert segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import EPS, Envelope, MFCCMatrix, Spectrogram, taper_window

OVERLAY_DURATION_S = 1.5
OVERLAY_DURATION_RANGE = (1.0, 2.0)
ALERT_LENGTH_S = 1.0
ALERT_STRIDE_S = 1.0
EXCERPT_TAPER = 0.1


@dataclass
class Excerpt:
    """A tapered mono snippet at the analysis rate, plus where it came from."""

    samples: np.ndarray
    sample_rate: int
    source_start: int

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))


def select_overlay(percussive: np.ndarray, sample_rate: int,
                   beats_samples: np.ndarray, perc_onset: Envelope,
                   duration_s: float = OVERLAY_DURATION_S) -> Excerpt | None:
    """Copy the strongest percussive beat span; ties go to the lowest index."""
    duration_s = float(np.clip(duration_s, *OVERLAY_DURATION_RANGE))
    beats = np.asarray(beats_samples, dtype=np.int64)
    span = int(round(duration_s * sample_rate))
    feasible = beats[beats + span <= percussive.shape[0]]
    if feasible.size == 0:
        return None
    hop = perc_onset.hop_length
    values = perc_onset.values
    scores = np.empty(feasible.shape[0])
    for k, b in enumerate(feasible):
        lo = int(b // hop)
        hi = max(int((b + span) // hop), lo + 1)
        scores[k] = values[lo:min(hi, len(values))].mean() if lo < len(values) else 0.0
    best = int(np.argmax(scores))  # argmax returns the first (lowest) index on ties
    start = int(feasible[best])
    snippet = taper_window(percussive[start:start + span], EXCERPT_TAPER)
    return Excerpt(snippet, sample_rate, start)


def _spectral_flatness(mags: np.ndarray) -> np.ndarray:
    power = mags ** 2 + EPS
    geo = np.exp(np.mean(np.log(power), axis=1))
    return geo / np.mean(power, axis=1)


def _zscore(v: np.ndarray) -> np.ndarray:
    std = v.std()
    if std <= EPS:
        return np.zeros_like(v)
    return (v - v.mean()) / std


def select_alert_segment(samples: np.ndarray, sample_rate: int,
                         bounds: np.ndarray, mfcc: MFCCMatrix, spec: Spectrogram,
                         rms_env: Envelope,
                         alert_length_s: float = ALERT_LENGTH_S) -> Excerpt | None:
    """Pick the most homogeneous, tonal, sufficiently loud window of the track.

    Candidate starts are every segment bound plus a 1 s stride grid. Windows
    quieter than the track median RMS are excluded unless that empties the
    pool. Scores are summed z-scores; the earliest window wins ties.
    """
    n = samples.shape[0]
    span = int(round(alert_length_s * sample_rate))
    if n < 2 * span:
        return None
    stride = int(round(ALERT_STRIDE_S * sample_rate))
    starts = sorted(set(
        [int(b) for b in np.asarray(bounds, dtype=np.int64) if b + span <= n]
        + list(range(0, n - span + 1, stride))))
    if not starts:
        return None

    hop = mfcc.hop_length
    flat = _spectral_flatness(spec.magnitudes)
    track_median_rms = float(np.median(rms_env.values))

    homog = np.empty(len(starts))
    mono = np.empty(len(starts))
    energy = np.empty(len(starts))
    for k, s in enumerate(starts):
        lo = s // hop
        hi = max((s + span) // hop, lo + 1)
        cep = mfcc.coeffs[lo:hi]
        if cep.shape[0] >= 2:
            homog[k] = -float(np.mean(np.linalg.norm(np.diff(cep, axis=0), axis=1)))
        else:
            homog[k] = 0.0
        mono[k] = -float(np.mean(flat[lo:min(hi, flat.shape[0])]))
        energy[k] = float(np.mean(rms_env.values[lo:min(hi, rms_env.n_frames)]))

    keep = energy >= track_median_rms
    if not keep.any():
        keep = np.ones(len(starts), dtype=bool)
    score = _zscore(homog) + _zscore(mono) + _zscore(energy)
    score[~keep] = -np.inf
    best = int(np.argmax(score))
    start = starts[best]
    snippet = taper_window(samples[start:start + span], EXCERPT_TAPER)
    return Excerpt(snippet, sample_rate, start)
