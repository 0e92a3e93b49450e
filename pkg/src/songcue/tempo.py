"""Dynamic tempo estimation and beat tracking on onset envelopes."""

from __future__ import annotations

import numpy as np

from .dsp import Envelope, lowpass_values

BPM_FLOOR = 40.0
BPM_CEIL = 200.0
TEMPO_WINDOW_S = 8.0
TEMPO_HOP_S = 1.0
BEAT_TIGHTNESS = 100.0
# log-normal lag prior; without it the autocorrelation prefers the 2x-period
# harmonic whenever the true period falls between integer lags
TEMPO_PRIOR_BPM = 120.0
TEMPO_PRIOR_OCTAVES = 1.0

SILENCE_EPS = 1e-8


def _autocorrelate(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    size = int(2 ** np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(v, size)
    ac = np.fft.irfft(spec * np.conj(spec), size)[:n]
    return ac


def _refine_peak(ac: np.ndarray, lag: int) -> float:
    """Parabolic interpolation of the autocorrelation maximum; integer lags alone
    quantize the tempo estimate too coarsely at short periods."""
    if lag <= 0 or lag >= ac.shape[0] - 1:
        return float(lag)
    a, b, c = ac[lag - 1], ac[lag], ac[lag + 1]
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-30:
        return float(lag)
    delta = 0.5 * (a - c) / denom
    return float(lag + np.clip(delta, -0.5, 0.5))


def dynamic_tempo(env: Envelope, window_s: float = TEMPO_WINDOW_S,
                  hop_s: float = TEMPO_HOP_S,
                  bpm_range: tuple[float, float] = (BPM_FLOOR, BPM_CEIL),
                  cutoff_hz: float = 0.25) -> tuple[Envelope, list[str]]:
    """Windowed-autocorrelation tempo curve on the envelope's hop grid.

    Returns the smoothed BPM curve plus flags ('low_confidence_tempo' when the
    envelope carried no usable periodicity and the curve sat at the floor).
    """
    bpm_lo, bpm_hi = bpm_range
    fr = env.frame_rate
    v = np.asarray(env.values, dtype=np.float64)
    n = v.shape[0]
    win = max(int(round(window_s * fr)), 4)
    step = max(int(round(hop_s * fr)), 1)
    lag_lo = max(int(np.ceil(fr * 60.0 / bpm_hi)), 1)
    lag_hi = int(np.floor(fr * 60.0 / bpm_lo))

    # widen envelope peaks by ~1 frame so near-integer-lag harmonics do not
    # outscore a true period that falls between integer lags
    if n >= 5:
        kernel = np.exp(-0.5 * (np.arange(-3, 4) / 1.0) ** 2)
        v = np.convolve(v, kernel / kernel.sum(), mode="same")

    lag_bpm = 60.0 * fr / np.arange(max(lag_lo, 1), lag_hi + 1)
    prior = np.exp(-0.5 * (np.log2(lag_bpm / TEMPO_PRIOR_BPM)
                           / TEMPO_PRIOR_OCTAVES) ** 2)

    starts = list(range(0, max(n - win, 0) + 1, step))
    if not starts:
        starts = [0]
    centers = []
    estimates = []
    confident = 0
    taper = np.hanning(win)
    for s in starts:
        seg = v[s:s + win]
        if seg.shape[0] < win:
            seg = np.concatenate([seg, np.zeros(win - seg.shape[0])])
        if seg.max() <= SILENCE_EPS:
            bpm = bpm_lo
        else:
            ac = _autocorrelate((seg - seg.mean()) * taper)
            hi = min(lag_hi, ac.shape[0] - 2)
            if hi <= lag_lo:
                bpm = bpm_lo
            else:
                weighted = ac[lag_lo:hi + 1] * prior[:hi + 1 - lag_lo]
                lag = lag_lo + int(np.argmax(weighted))
                if ac[lag] <= 0:
                    bpm = bpm_lo
                else:
                    bpm = 60.0 * fr / _refine_peak(ac, lag)
                    confident += 1
        centers.append(s + win // 2)
        estimates.append(float(np.clip(bpm, bpm_lo, bpm_hi)))

    grid = np.arange(n if n > 0 else 1)
    curve = np.interp(grid, centers, estimates)
    curve = lowpass_values(curve, fr, cutoff_hz)
    curve = np.clip(curve, bpm_lo, bpm_hi)
    flags = [] if confident > 0 else ["low_confidence_tempo"]
    return Envelope(curve, env.sample_rate, env.hop_length), flags


def track_beats(env: Envelope, tempo_hint_bpm: float,
                tightness: float = BEAT_TIGHTNESS) -> np.ndarray:
    """Globally optimal beat sequence by dynamic programming.

    Maximizes sum(onset[b_i]) - tightness * sum(log(gap_i / period)^2) over all
    frame sequences whose consecutive gaps lie in [period/2, 2*period].
    Returns beat positions as sample indices; empty for silent envelopes.
    """
    v = np.asarray(env.values, dtype=np.float64)
    n = v.shape[0]
    if n == 0 or v.max() <= SILENCE_EPS:
        return np.zeros(0, dtype=np.int64)
    std = v.std()
    if std <= 0:
        return np.zeros(0, dtype=np.int64)
    score = v / std

    fr = env.frame_rate
    bpm = float(np.clip(tempo_hint_bpm, BPM_FLOOR, BPM_CEIL))
    period = fr * 60.0 / bpm
    gap_lo = max(int(np.ceil(period / 2.0)), 1)
    gap_hi = max(int(np.floor(period * 2.0)), gap_lo)

    best = np.zeros(n)
    backlink = np.full(n, -1, dtype=np.int64)
    penalty = tightness * np.log(np.arange(gap_lo, gap_hi + 1) / period) ** 2
    for t in range(n):
        best[t] = score[t]
        hi_p = t - gap_lo
        if hi_p < 0:
            continue
        lo_p = max(t - gap_hi, 0)
        prev = np.arange(lo_p, hi_p + 1)
        cand = best[prev] - penalty[(t - prev) - gap_lo]
        k = int(np.argmax(cand))
        if cand[k] > 0:
            best[t] = score[t] + cand[k]
            backlink[t] = lo_p + k

    end = int(np.argmax(best))
    if best[end] <= 0:
        return np.zeros(0, dtype=np.int64)
    beats = [end]
    while backlink[beats[-1]] >= 0:
        beats.append(int(backlink[beats[-1]]))
    beats.reverse()
    return np.asarray(beats, dtype=np.int64) * env.hop_length
