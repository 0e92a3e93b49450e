"""Notification edits: per-category plans at three subtlety levels.

A plan is computed on the analysis timeline (mono, 22050 Hz) and carries a
fully rendered payload; the stream buffer maps it onto the native-rate
timeline when it is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from . import dsp
from .genres import GenreCategory
from .profiles import AnalysisProfile

LIMIT_KNEE = 0.9
CROSSFADE_S = 0.010
REPLACE_SPAN_S = 4.0
FORWARD_SEARCH_BEATS = 8
OFFBEAT_OFFSET_S = 0.120
ALERT_RMS_FACTOR = 2.0
ALERT_REPEATS = 4
ALERT_GAIN_RANGE = (0.5, 4.0)
OVERLAY_L2_GAIN = 1.8
JAZZ_L1_SEMITONES = 3.0
JAZZ_L2_SEMITONES = 6.0
JAZZ_L2_GAIN = 1.5


class SubtletyLevel(IntEnum):
    SUBTLE = 1
    NOTICEABLE = 2
    URGENT = 3


class EditKind(str, Enum):
    SUPERIMPOSE = "superimpose"
    REPLACE = "replace"
    INSERT = "insert"
    JUMP = "jump"


@dataclass
class EditPlan:
    kind: EditKind
    level: SubtletyLevel
    category: GenreCategory
    anchor: int                       # analysis-timeline sample
    payload: np.ndarray | None = None  # mono at the analysis rate
    gain: float = 1.0
    jump_target: int | None = None    # analysis-timeline sample
    crossfade_s: float = CROSSFADE_S
    degraded: bool = False
    detail: str = ""

    @property
    def span(self) -> int:
        return 0 if self.payload is None else len(self.payload)


def soft_limit(x: np.ndarray, knee: float = LIMIT_KNEE) -> np.ndarray:
    """Identity below the knee, smooth tanh compression above, bounded by 1."""
    y = np.array(x, dtype=np.float64, copy=True)
    over = np.abs(y) > knee
    if np.any(over):
        a = np.abs(y[over])
        y[over] = np.sign(y[over]) * (
            knee + (1.0 - knee) * np.tanh((a - knee) / (1.0 - knee)))
    return y


class Planner:
    """Turns (level, earliest position) into a concrete edit for one track."""

    def __init__(self, profile: AnalysisProfile, samples: np.ndarray,
                 seed: int | None = None):
        self.profile = profile
        self.samples = np.asarray(samples, dtype=np.float64)
        self.rng = np.random.default_rng(seed)
        self.visited: set[int] = set()
        self._played_upto = 0

    # -- playback bookkeeping --

    def mark_played(self, lo: int, hi: int) -> None:
        """Record that original-timeline samples [lo, hi) have been emitted."""
        beats = self.profile.beats
        if beats is None or len(beats) == 0 or hi <= lo:
            return
        idx = np.nonzero((beats >= lo) & (beats < hi))[0]
        self.visited.update(int(i) for i in idx)
        self._played_upto = max(self._played_upto, hi)

    # -- anchor helpers --

    def _beats_from(self, not_before: int, count: int) -> np.ndarray:
        beats = self.profile.beats
        if beats is None or len(beats) == 0:
            return np.empty(0, dtype=np.int64)
        start = int(np.searchsorted(beats, not_before, side="left"))
        return beats[start:start + count]

    def _next_bound(self, not_before: int) -> int | None:
        bounds = self.profile.segment_bounds
        if bounds is None or len(bounds) == 0:
            return None
        after = bounds[bounds >= not_before]
        return int(after[0]) if len(after) else None

    def _fallback_anchor(self, not_before: int) -> int:
        nxt = self._beats_from(not_before, 1)
        return int(nxt[0]) if len(nxt) else int(not_before)

    def _horizon(self, not_before: int) -> int:
        """How far ahead an anchor may sit: the 8th upcoming beat, else 4 s."""
        window = self._beats_from(not_before, FORWARD_SEARCH_BEATS)
        if len(window) == FORWARD_SEARCH_BEATS:
            return int(window[-1])
        return int(not_before + 4 * self.profile.sample_rate)

    def _nearby_bound(self, not_before: int) -> int | None:
        bound = self._next_bound(not_before)
        if bound is not None and bound <= self._horizon(not_before):
            return bound
        return None

    def _amp_at(self, sample: int) -> float:
        c = self.profile.curves
        return float(c.amplitude_at(sample)) if c is not None else 0.1

    def _perc_amp_at(self, sample: int) -> float:
        c = self.profile.curves
        if c is not None and c.percussive_amplitude is not None:
            return float(c.percussive_amplitude_at(sample))
        return self._amp_at(sample)

    # -- plan entry point --

    def plan(self, level: SubtletyLevel, not_before: int) -> EditPlan | None:
        """Best available edit no earlier than not_before; None if unservable."""
        level = SubtletyLevel(level)
        if level is SubtletyLevel.URGENT:
            return self._plan_alert(level, not_before, degraded=False)
        recipe = {
            GenreCategory.CLASSICAL: self._plan_classical,
            GenreCategory.BLUES: self._plan_blues,
            GenreCategory.JAZZ: self._plan_jazz,
            GenreCategory.POP: self._plan_pop,
        }[self.profile.category]
        plan = recipe(level, not_before)
        if plan is not None:
            return plan
        return self._plan_alert(level, not_before, degraded=True)

    # -- classical: echo at a section boundary, or a stretched restatement --

    def _plan_classical(self, level: SubtletyLevel,
                        not_before: int) -> EditPlan | None:
        sr = self.profile.sample_rate
        bound = self._nearby_bound(not_before)
        anchor = bound if bound is not None else self._fallback_anchor(not_before)
        c = self.profile.curves
        if level is SubtletyLevel.SUBTLE:
            delay_s = float(c.delay_at(anchor)) if c is not None else 0.3
            gain = float(c.echo_amp_at(anchor)) if c is not None else 0.6
            d = int(round(delay_s * sr))
            lo = max(anchor - d, 0)
            if anchor - lo < int(0.05 * sr):
                return None
            payload = dsp.taper_window(self.samples[lo:anchor].copy())
            return EditPlan(EditKind.SUPERIMPOSE, level, self.profile.category,
                            anchor, payload, gain,
                            detail=f"delay_s={delay_s:.3f} echo_gain={gain:.3f}")
        rate = float(c.rate_at(anchor)) if c is not None else 1.15
        span = int(round(REPLACE_SPAN_S * sr))
        src_len = int(round(span * rate))
        src = self.samples[anchor:anchor + src_len]
        if len(src) < sr:
            return None
        stretched = dsp.time_stretch(src, rate)
        payload = stretched[:span].copy()
        return EditPlan(EditKind.REPLACE, level, self.profile.category,
                        anchor, payload, 1.0,
                        detail=f"stretch_rate={rate:.3f} span_s={len(payload) / sr:.2f}")

    # -- blues: superimpose the track's own strongest percussive hit --

    def _plan_blues(self, level: SubtletyLevel,
                    not_before: int) -> EditPlan | None:
        overlay = self.profile.overlay
        if overlay is None:
            return None
        sr = self.profile.sample_rate
        nxt = self._beats_from(not_before, 1)
        if len(nxt) == 0:
            return None
        anchor = int(nxt[0])
        ref = overlay.rms
        if ref <= 1e-9:
            return None
        gain = self._perc_amp_at(anchor) / ref
        detail = f"beat_sample={anchor} overlay_rms={ref:.4f}"
        if level is SubtletyLevel.NOTICEABLE:
            anchor += int(round(OFFBEAT_OFFSET_S * sr))
            gain *= OVERLAY_L2_GAIN
            detail += f" offbeat_offset_s={OFFBEAT_OFFSET_S}"
        gain = float(np.clip(gain, 0.05, 4.0))
        return EditPlan(EditKind.SUPERIMPOSE, level, self.profile.category,
                        anchor, overlay.samples.copy(), gain,
                        detail=detail + f" gain={gain:.3f}")

    # -- jazz: restate the next phrase transposed --

    def _plan_jazz(self, level: SubtletyLevel,
                   not_before: int) -> EditPlan | None:
        sr = self.profile.sample_rate
        anchor = self._fallback_anchor(not_before)
        span = int(round(REPLACE_SPAN_S * sr))
        src = self.samples[anchor:anchor + span]
        if len(src) < sr:
            return None
        if level is SubtletyLevel.SUBTLE:
            semitones, gain = JAZZ_L1_SEMITONES, 1.0
        else:
            semitones, gain = JAZZ_L2_SEMITONES, JAZZ_L2_GAIN
        payload = dsp.pitch_shift(src, semitones)
        return EditPlan(EditKind.REPLACE, level, self.profile.category,
                        anchor, payload, gain,
                        detail=f"semitones={semitones:g} gain={gain:g}")

    # -- pop: splice the timeline along the jump graph --

    def _plan_pop(self, level: SubtletyLevel,
                  not_before: int) -> EditPlan | None:
        graph = self.profile.jump_graph
        beats = self.profile.beats
        if graph is None or beats is None or len(beats) == 0:
            return None
        window = self._beats_from(not_before, FORWARD_SEARCH_BEATS)
        if len(window) == 0:
            return None
        start_idx = int(np.searchsorted(beats, window[0], side="left"))
        if level is SubtletyLevel.SUBTLE:
            # earliest upcoming beat with an unvisited similar target; the
            # nearest such target keeps the timeline skip small
            for k in range(len(window)):
                i = start_idx + k
                options = [j for j in graph.candidates.get(i, [])
                           if j not in self.visited and j != i]
                if options:
                    j = min(options,
                            key=lambda q: (abs(int(beats[q]) - int(beats[i])), q))
                    return EditPlan(
                        EditKind.JUMP, level, self.profile.category,
                        int(beats[i]), jump_target=int(beats[j]),
                        detail=f"from_beat={i} to_beat={j} similar=1")
            return None
        # noticeable: jump to material the listener has already heard,
        # whether or not it resembles the anchor
        if not self.visited:
            return None
        i = start_idx
        if i >= len(beats):
            return None
        choices = sorted(self.visited)
        j = int(choices[int(self.rng.integers(len(choices)))])
        if int(beats[j]) == int(beats[i]):
            return None
        return EditPlan(EditKind.JUMP, level, self.profile.category,
                        int(beats[i]), jump_target=int(beats[j]),
                        detail=f"from_beat={i} to_beat={j} similar=0")

    # -- alert: replace upcoming audio with the track's signature excerpt --

    def _plan_alert(self, level: SubtletyLevel, not_before: int,
                    degraded: bool) -> EditPlan | None:
        alert = self.profile.alert
        if alert is None or alert.rms <= 1e-9:
            return None
        anchor = self._fallback_anchor(not_before)
        target = ALERT_RMS_FACTOR * max(self._amp_at(anchor), 1e-3)
        gain = float(np.clip(target / alert.rms, *ALERT_GAIN_RANGE))
        # urgency reads as repetition: pulse the excerpt back to back
        payload = np.tile(dsp.taper_window(alert.samples.copy()), ALERT_REPEATS)
        return EditPlan(EditKind.INSERT, level, self.profile.category,
                        anchor, payload, gain, degraded=degraded,
                        detail=f"alert_gain={gain:.3f} repeats={ALERT_REPEATS}")
