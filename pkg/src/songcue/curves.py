"""Linear rescaling of analysis curves onto edit-parameter ranges."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# parameter ranges for the per-track control curves
DELAY_MIN_S = 0.15
DELAY_MAX_S = 0.60
ECHO_AMP_MIN = 0.4
ECHO_AMP_MAX = 0.9
RATE_MIN = 1.05
RATE_MAX = 1.25


def rescale_curve(x, x_min: float, x_max: float, y_min: float, y_max: float):
    """Map x linearly so x_min -> y_max and x_max -> y_min, clamped to [y_min, y_max].

    A degenerate input range (x_max == x_min) yields the constant midpoint
    (y_min + y_max) / 2; callers flag that case.
    """
    x = np.asarray(x, dtype=np.float64)
    if x_max == x_min:
        out = np.full_like(x, (y_min + y_max) / 2.0)
        return float(out) if out.ndim == 0 else out
    y = y_max + (y_min - y_max) / (x_max - x_min) * (x - x_min)
    lo, hi = min(y_min, y_max), max(y_min, y_max)
    y = np.clip(y, lo, hi)
    return float(y) if y.ndim == 0 else y


@dataclass
class CurveSet:
    """Smoothed per-hop control curves plus the bounds used to build them.

    All arrays share one hop grid (hop_length samples at sample_rate).
    """

    sample_rate: int
    hop_length: int
    tempo: np.ndarray          # BPM per hop
    amplitude: np.ndarray      # RMS per hop
    delay: np.ndarray          # echo delay, seconds per hop
    echo_amp: np.ndarray       # echo gain relative to local RMS
    rate: np.ndarray           # stretch rate per hop
    tempo_min: float           # 5th percentile of the smoothed tempo curve
    tempo_max: float           # 95th percentile
    amp_min: float
    amp_max: float
    percussive_amplitude: np.ndarray | None = None
    degenerate: list[str] = field(default_factory=list)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length

    def index_at(self, sample: int) -> int:
        idx = int(sample // self.hop_length)
        return min(max(idx, 0), len(self.tempo) - 1)

    def delay_at(self, sample: int) -> float:
        return float(self.delay[self.index_at(sample)])

    def echo_amp_at(self, sample: int) -> float:
        return float(self.echo_amp[self.index_at(sample)])

    def rate_at(self, sample: int) -> float:
        return float(self.rate[self.index_at(sample)])

    def tempo_at(self, sample: int) -> float:
        return float(self.tempo[self.index_at(sample)])

    def amplitude_at(self, sample: int) -> float:
        return float(self.amplitude[self.index_at(sample)])

    def percussive_amplitude_at(self, sample: int) -> float:
        if self.percussive_amplitude is None:
            return self.amplitude_at(sample)
        return float(self.percussive_amplitude[self.index_at(sample)])


def build_curves(tempo: np.ndarray, amplitude: np.ndarray, sample_rate: int,
                 hop_length: int, percussive_amplitude: np.ndarray | None = None,
                 delay_range: tuple[float, float] = (DELAY_MIN_S, DELAY_MAX_S),
                 echo_range: tuple[float, float] = (ECHO_AMP_MIN, ECHO_AMP_MAX),
                 rate_range: tuple[float, float] = (RATE_MIN, RATE_MAX)) -> CurveSet:
    """Derive the delay/echo/rate control curves from smoothed tempo and RMS curves."""
    tempo = np.asarray(tempo, dtype=np.float64)
    amplitude = np.asarray(amplitude, dtype=np.float64)
    if tempo.shape != amplitude.shape:
        raise ValueError("tempo and amplitude curves must share one hop grid")
    t_min, t_max = np.percentile(tempo, [5.0, 95.0])
    a_min, a_max = float(amplitude.min()), float(amplitude.max())
    degenerate = []
    if t_max == t_min:
        degenerate.append("tempo")
    if a_max == a_min:
        degenerate.append("amplitude")
    delay = rescale_curve(tempo, t_min, t_max, *delay_range)
    echo_amp = rescale_curve(amplitude, a_min, a_max, *echo_range)
    rate = rescale_curve(tempo, t_min, t_max, *rate_range)
    return CurveSet(sample_rate=sample_rate, hop_length=hop_length, tempo=tempo,
                    amplitude=amplitude, delay=delay, echo_amp=echo_amp, rate=rate,
                    tempo_min=float(t_min), tempo_max=float(t_max),
                    amp_min=a_min, amp_max=a_max,
                    percussive_amplitude=percussive_amplitude, degenerate=degenerate)
