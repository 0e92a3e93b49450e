"""Mutable playback buffer: edits land ahead of an advancing emit pointer."""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from .engine import EditKind, EditPlan, soft_limit


class StaleAnchorError(Exception):
    """The plan's anchor is no longer comfortably ahead of the emit pointer."""


class TimelineMap:
    """Piecewise map between buffer positions and original-track positions.

    Identity until the first jump splice; each jump starts a new linear
    segment. All positions are native-rate sample indices.
    """

    def __init__(self):
        self._buffer_starts = [0]
        self._orig_starts = [0]

    def record_jump(self, buffer_pos: int, orig_pos: int) -> None:
        if buffer_pos < self._buffer_starts[-1]:
            raise ValueError("jumps must be recorded in buffer order")
        if buffer_pos == self._buffer_starts[-1]:
            self._orig_starts[-1] = orig_pos
            return
        self._buffer_starts.append(buffer_pos)
        self._orig_starts.append(orig_pos)

    def orig_at(self, buffer_pos: int) -> int:
        k = bisect.bisect_right(self._buffer_starts, buffer_pos) - 1
        return self._orig_starts[k] + (buffer_pos - self._buffer_starts[k])

    def buffer_for_future_orig(self, orig_pos: int) -> int:
        """Resolve an original position onto the not-yet-spliced tail segment."""
        return self._buffer_starts[-1] + (orig_pos - self._orig_starts[-1])

    def orig_ranges(self, lo: int, hi: int) -> list[tuple[int, int]]:
        """Original-track spans covered by buffer range [lo, hi)."""
        out = []
        k = bisect.bisect_right(self._buffer_starts, lo) - 1
        while lo < hi:
            nxt = self._buffer_starts[k + 1] if k + 1 < len(self._buffer_starts) \
                else hi
            e = min(hi, nxt)
            base = self._orig_starts[k]
            out.append((base + lo - self._buffer_starts[k],
                        base + e - self._buffer_starts[k]))
            lo = e
            k += 1
        return out

    @property
    def n_segments(self) -> int:
        return len(self._buffer_starts)


@dataclass
class EditReceipt:
    plan: EditPlan
    buffer_start: int
    buffer_end: int
    orig_start: int
    pointer_at_apply: int


class StreamBuffer:
    """The full decoded track, rewritable anywhere past pointer + min_lead."""

    def __init__(self, waveform, analysis_rate: int, min_lead_s: float = 0.1):
        samples = np.asarray(waveform.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        self.data = samples.copy()
        self.source = samples.copy()
        self.native_rate = int(waveform.sample_rate)
        self.analysis_rate = int(analysis_rate)
        self.min_lead = int(round(min_lead_s * self.native_rate))
        self.pointer = 0
        self.timeline = TimelineMap()
        self.lock = threading.RLock()

    # -- coordinate changes --

    def to_native(self, analysis_pos: int) -> int:
        return int(round(analysis_pos * self.native_rate / self.analysis_rate))

    def to_analysis(self, native_pos: int) -> int:
        return int(round(native_pos * self.analysis_rate / self.native_rate))

    def _render_payload(self, plan: EditPlan) -> np.ndarray:
        payload = np.asarray(plan.payload, dtype=np.float64) * plan.gain
        if self.native_rate != self.analysis_rate:
            f = Fraction(self.native_rate, self.analysis_rate)
            payload = resample_poly(payload, f.numerator, f.denominator)
        return payload

    # -- emit side --

    @property
    def n_samples(self) -> int:
        with self.lock:
            return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    def emit(self, n_frames: int) -> np.ndarray:
        """Next block; shorter than n_frames only at end of stream."""
        with self.lock:
            lo = self.pointer
            hi = min(lo + n_frames, self.data.shape[0])
            block = self.data[lo:hi].copy()
            self.pointer = hi
            return block

    def exhausted(self) -> bool:
        with self.lock:
            return self.pointer >= self.data.shape[0]

    def orig_position(self, lead: int = 0) -> int:
        """Original-track position the stream will reach `lead` samples from now."""
        with self.lock:
            return self.timeline.orig_at(min(self.pointer + lead,
                                             max(self.data.shape[0] - 1, 0)))

    # -- edit side --

    def apply_plan(self, plan: EditPlan) -> EditReceipt:
        """Rewrite the future: mix, replace, or splice at the plan's anchor."""
        with self.lock:
            anchor_orig = self.to_native(plan.anchor)
            start = self.timeline.buffer_for_future_orig(anchor_orig)
            if start < self.pointer + self.min_lead:
                raise StaleAnchorError(
                    f"anchor at buffer {start} but pointer {self.pointer}")
            if start >= self.data.shape[0]:
                raise StaleAnchorError("anchor beyond end of stream")
            if plan.kind is EditKind.JUMP:
                end = self._splice(plan, start)
            elif plan.kind is EditKind.SUPERIMPOSE:
                end = self._mix(plan, start)
            else:
                end = self._replace(plan, start)
            return EditReceipt(plan, start, end, anchor_orig, self.pointer)

    def _xfade(self, plan: EditPlan) -> int:
        return int(round(plan.crossfade_s * self.native_rate))

    def _mix(self, plan: EditPlan, start: int) -> int:
        payload = self._render_payload(plan)
        end = min(start + len(payload), self.data.shape[0])
        span = self.data[start:end] + payload[:end - start, None]
        self.data[start:end] = soft_limit(span)
        return end

    def _replace(self, plan: EditPlan, start: int) -> int:
        payload = self._render_payload(plan)
        end = min(start + len(payload), self.data.shape[0])
        new = np.repeat(payload[:end - start, None], self.channels, axis=1)
        xf = min(self._xfade(plan), (end - start) // 2)
        if xf > 0:
            fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(xf) / xf)
            new[:xf] = (1 - fade[:, None]) * self.data[start:start + xf] \
                + fade[:, None] * new[:xf]
            if end < self.data.shape[0]:
                new[-xf:] = fade[::-1][:, None] * new[-xf:] \
                    + (1 - fade[::-1])[:, None] * self.data[end - xf:end]
        self.data[start:end] = soft_limit(new)
        return end

    def _align_target(self, start: int, target: int) -> int:
        """Nudge the splice point to the best-correlated offset nearby.

        Beat positions are quantized to the hop grid; up to +-2 frames of
        misalignment would otherwise smear an audibly seamless jump.
        """
        win = int(round(0.09 * self.native_rate))
        search = int(round(0.05 * self.native_rate))
        ref = self.data[start:start + win].mean(axis=1)
        lo = max(target - search, 0)
        hi = min(target + search + win, self.source.shape[0])
        seg = self.source[lo:hi].mean(axis=1)
        if len(ref) < win or len(seg) < win + 1:
            return target
        c = np.correlate(seg, ref, mode="valid")
        return lo + int(np.argmax(c))

    def _splice(self, plan: EditPlan, start: int) -> int:
        target = self.to_native(plan.jump_target)
        target = min(max(target, 0), self.source.shape[0] - 1)
        target = self._align_target(start, target)
        xf = self._xfade(plan)
        xf = min(xf, self.data.shape[0] - start, self.source.shape[0] - target)
        old_head = self.data[start:start + xf]
        new_head = self.source[target:target + xf]
        fade = (0.5 - 0.5 * np.cos(np.pi * np.arange(xf) / xf))[:, None] \
            if xf > 0 else np.zeros((0, 1))
        blended = (1 - fade) * old_head + fade * new_head
        tail = self.source[target + xf:]
        self.data = np.concatenate(
            [self.data[:start], soft_limit(blended), tail])
        self.timeline.record_jump(start, target)
        return start + xf

    # -- offline rendering --

    def remaining(self) -> np.ndarray:
        with self.lock:
            return self.data[self.pointer:].copy()

    def render_all(self) -> np.ndarray:
        with self.lock:
            out = self.data.copy()
        return out[:, 0] if out.shape[1] == 1 else out
