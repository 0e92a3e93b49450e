"""Playback sessions: stream the playlist, fold notifications into the music."""

from __future__ import annotations

import queue
import re
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .audio import AudioTrack, Waveform, save_wav
from .buffer import StaleAnchorError, StreamBuffer
from .engine import Planner, SubtletyLevel
from .profiles import AnalysisProfile
from .protocol import WireMessage

# ----- Event log -----

EVENTS = ("SESSION_START", "SESSION_STOP", "TRACK", "TASK", "NOTIFY", "LEVEL",
          "EDIT", "DEGRADED", "UNSERVED", "DROP", "UNDERRUN")

_FIELD_RE = re.compile(r'(\w+)=("(?:[^"\\]|\\.)*"|\S+)')


class SessionLog:
    """Append-only event log: ISO-8601 timestamp, event name, key=value pairs.

    Timestamps never go backwards even if the wall clock does; string values
    are JSON-quoted so the line grammar stays unambiguous.
    """

    def __init__(self, path: str | Path | None = None, now=None):
        self.lines: list[str] = []
        self._fh = open(path, "w") if path else None
        self._lock = threading.Lock()
        self._last: datetime | None = None
        self._now = now or (lambda: datetime.now(timezone.utc))

    @staticmethod
    def _fmt(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.6g}"
        import json
        return json.dumps(str(v))

    def emit(self, event: str, **fields) -> str:
        if event not in EVENTS:
            raise ValueError(f"unknown event {event!r}")
        with self._lock:
            ts = self._now()
            if self._last is not None and ts < self._last:
                ts = self._last
            self._last = ts
            stamp = ts.isoformat(timespec="milliseconds")
            stamp = stamp.replace("+00:00", "Z")
            parts = [stamp, event]
            parts += [f"{k}={self._fmt(v)}" for k, v in fields.items()]
            line = " ".join(parts)
            self.lines.append(line)
            if self._fh is not None:
                self._fh.write(line + "\n")
                self._fh.flush()
            return line

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def parse_log_line(line: str) -> tuple[datetime, str, dict]:
    """Inverse of SessionLog.emit for audits."""
    import json
    stamp, rest = line.split(" ", 1)
    ts = datetime.fromisoformat(stamp.replace("Z", "+00:00"))
    bits = rest.split(" ", 1)
    event = bits[0]
    fields = {}
    if len(bits) > 1:
        for key, val in _FIELD_RE.findall(bits[1]):
            if val.startswith('"'):
                fields[key] = json.loads(val)
            else:
                try:
                    fields[key] = int(val)
                except ValueError:
                    try:
                        fields[key] = float(val)
                    except ValueError:
                        fields[key] = val
    return ts, event, fields


# ----- Output sinks -----

class SinkUnavailableError(Exception):
    pass


class CaptureSink:
    def __init__(self):
        self.blocks: list[np.ndarray] = []
        self.sample_rate: int | None = None

    def start(self, sample_rate: int, channels: int) -> None:
        self.sample_rate = sample_rate

    def write(self, block: np.ndarray) -> None:
        self.blocks.append(block)

    def close(self) -> None:
        pass

    def result(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((0, 1))
        return np.concatenate(self.blocks, axis=0)


class WavFileSink(CaptureSink):
    def __init__(self, path: str | Path):
        super().__init__()
        self.path = Path(path)

    def close(self) -> None:
        out = self.result()
        rate = self.sample_rate or 22050
        save_wav(self.path, Waveform(out[:, 0] if out.shape[1] == 1 else out,
                                     rate))


class NullSink(CaptureSink):
    def write(self, block: np.ndarray) -> None:
        pass


def make_sink(spec: str):
    if spec == "capture":
        return CaptureSink()
    if spec == "null":
        return NullSink()
    if spec == "device":
        raise SinkUnavailableError(
            "no audio output device is available here; use --out FILE or "
            "--sink null")
    return WavFileSink(spec)


# ----- Session -----

@dataclass
class SessionConfig:
    lead_s: float = 1.0
    min_spacing_s: float = 10.0
    coalesce_s: float = 0.5
    block_frames: int = 2048
    queue_size: int = 64
    seed: int = 0
    realtime: bool = False
    task_prompt: str | None = None
    level_override: int | None = None
    max_retries: int = 3


@dataclass
class _Pending:
    level: int
    source: str
    first_stream_t: float
    merged: int = 1
    retries: int = 0


class Session:
    """One playlist playthrough; requests may arrive from any thread."""

    def __init__(self, entries: list[tuple[AudioTrack, AnalysisProfile]],
                 sink, log: SessionLog | None = None,
                 config: SessionConfig | None = None, tick_hook=None):
        self.entries = entries
        self.sink = sink
        self.log = log or SessionLog()
        self.config = config or SessionConfig()
        self.tick_hook = tick_hook
        self.queue: queue.Queue = queue.Queue(self.config.queue_size)
        self.receipts: list[tuple[int, object]] = []
        self.outcomes: list[tuple[str, object]] = []
        self.track_offsets: list[float] = []
        self.stream_t = 0.0
        self.counts = {"notified": 0, "edits": 0, "unserved": 0, "dropped": 0}
        self._counts_lock = threading.Lock()
        self._pending: _Pending | None = None
        self._last_edit_t: float | None = None
        self._stop = threading.Event()

    def _bump(self, key: str) -> None:
        with self._counts_lock:
            self.counts[key] += 1

    # -- request intake (thread safe) --

    def on_notify(self, msg: WireMessage) -> tuple[bool, dict]:
        try:
            self.queue.put_nowait(msg)
        except queue.Full:
            self._bump("dropped")
            self.log.emit("DROP", reason="queue_full", source=msg.source,
                          level=msg.level)
            return False, {"error": "queue full"}
        return True, {}

    def request(self, level: int, source: str = "local") -> bool:
        ok, _ = self.on_notify(WireMessage(type="notify", level=int(level),
                                           source=source))
        return ok

    def stop(self) -> None:
        self._stop.set()

    # -- main loop --

    def run(self) -> None:
        cfg = self.config
        self.log.emit("SESSION_START", tracks=len(self.entries),
                      lead_s=cfg.lead_s, min_spacing_s=cfg.min_spacing_s,
                      realtime=cfg.realtime, seed=cfg.seed)
        if cfg.task_prompt:
            self.log.emit("TASK", prompt=cfg.task_prompt)
        if cfg.level_override is not None:
            self.log.emit("LEVEL", mode="override",
                          to_level=cfg.level_override)
        try:
            for index, (track, profile) in enumerate(self.entries):
                if self._stop.is_set():
                    break
                self._run_track(index, track, profile)
        finally:
            if self._pending is not None:
                self._bump("unserved")
                self.outcomes.append(("unserved", None))
                self.log.emit("UNSERVED", reason="stream_ended",
                              level=self._pending.level,
                              source=self._pending.source,
                              merged=self._pending.merged)
                self._pending = None
            self.log.emit("SESSION_STOP", stream_s=self.stream_t,
                          **self.counts)
            self.sink.close()
            self.log.close()

    def _run_track(self, index: int, track: AudioTrack,
                   profile: AnalysisProfile) -> None:
        cfg = self.config
        wav = track.waveform
        buffer = StreamBuffer(wav, profile.sample_rate)
        analysis = track.analysis_waveform().samples
        planner = Planner(profile, analysis, seed=cfg.seed + index)
        rate = buffer.native_rate
        track_t0 = self.stream_t
        self.track_offsets.append(track_t0)
        self.log.emit("TRACK", index=index, path=str(track.path),
                      category=profile.category.value,
                      duration_s=wav.duration, rate=rate,
                      channels=buffer.channels)
        if self.sink.sample_rate is None:
            self.sink.start(rate, buffer.channels)
        deadline = time.monotonic()
        block_dur = cfg.block_frames / rate

        while not buffer.exhausted() and not self._stop.is_set():
            if self.tick_hook is not None:
                self.tick_hook(self, self.stream_t)
            self._drain_queue()
            self._maybe_apply(buffer, planner, track_t0, index)
            lo = buffer.pointer
            block = buffer.emit(cfg.block_frames)
            for olo, ohi in buffer.timeline.orig_ranges(lo, lo + len(block)):
                planner.mark_played(buffer.to_analysis(olo),
                                    buffer.to_analysis(ohi))
            self.sink.write(block)
            self.stream_t += len(block) / rate
            if cfg.realtime:
                deadline += len(block) / rate
                now = time.monotonic()
                if now - deadline > block_dur:
                    self.log.emit("UNDERRUN", late_s=now - deadline)
                    deadline = now
                elif deadline > now:
                    time.sleep(deadline - now)

    # -- notification folding --

    def _drain_queue(self) -> None:
        while True:
            try:
                msg = self.queue.get_nowait()
            except queue.Empty:
                return
            self._bump("notified")
            self.log.emit("NOTIFY", level=msg.level, source=msg.source,
                          stream_t=self.stream_t)
            level = self.config.level_override or msg.level
            if self._pending is None:
                self._pending = _Pending(level, msg.source, self.stream_t)
            else:
                self._pending.merged += 1
                if level > self._pending.level:
                    self.log.emit("LEVEL", source=msg.source,
                                  from_level=self._pending.level,
                                  to_level=level)
                    self._pending.level = level
                    self._pending.source = msg.source

    def _maybe_apply(self, buffer: StreamBuffer, planner: Planner,
                     track_t0: float, track_index: int) -> None:
        cfg = self.config
        pending = self._pending
        if pending is None:
            return
        urgent = pending.level == int(SubtletyLevel.URGENT)
        if not urgent and self.stream_t - pending.first_stream_t < cfg.coalesce_s:
            return
        earliest_t = self.stream_t + cfg.lead_s
        if self._last_edit_t is not None:
            earliest_t = max(earliest_t,
                             self._last_edit_t + cfg.min_spacing_s)
        nb_buffer = int(round((earliest_t - track_t0) * buffer.native_rate))
        if nb_buffer >= buffer.n_samples:
            return  # carries over to the next track
        nb_orig = buffer.to_analysis(buffer.timeline.orig_at(nb_buffer))
        plan = planner.plan(SubtletyLevel(pending.level), nb_orig)
        if plan is None:
            self._bump("unserved")
            self.outcomes.append(("unserved", None))
            self.log.emit("UNSERVED", reason="no_feasible_edit",
                          level=pending.level, source=pending.source,
                          merged=pending.merged)
            self._pending = None
            return
        try:
            receipt = buffer.apply_plan(plan)
        except StaleAnchorError:
            pending.retries += 1
            if pending.retries > cfg.max_retries:
                self._bump("unserved")
                self.outcomes.append(("unserved", None))
                self.log.emit("UNSERVED", reason="anchor_unreachable",
                              level=pending.level, source=pending.source,
                              merged=pending.merged)
                self._pending = None
            return
        if plan.degraded:
            self.log.emit("DEGRADED", level=pending.level,
                          category=plan.category.value,
                          reason="primary_recipe_infeasible")
        anchor_t = track_t0 + receipt.buffer_start / buffer.native_rate
        self._bump("edits")
        self.receipts.append((track_index, receipt))
        self.outcomes.append(("edit", (track_index, receipt)))
        self.log.emit("EDIT", kind=plan.kind.value, level=int(plan.level),
                      category=plan.category.value,
                      stream_t=anchor_t,
                      orig_s=receipt.orig_start / buffer.native_rate,
                      merged=pending.merged, source=pending.source,
                      degraded=plan.degraded, detail=plan.detail)
        self._last_edit_t = anchor_t
        self._pending = None
