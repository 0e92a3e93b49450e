"""Seeded notification schedules rendered to audio plus a ground-truth manifest."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio import AudioTrack, Waveform, save_wav
from .profiles import AnalysisProfile
from .server import CaptureSink, Session, SessionConfig, SessionLog

CONTROL_TONE_HZ = 880.0
CONTROL_TONE_S = 0.5
CONTROL_TONE_DBFS = -12.0
SCHEDULE_MIN_GAP_S = 15.0
SCHEDULE_LEAD_IN_S = 5.0
SCHEDULE_TAIL_S = 12.0
PER_LEVEL = 2


@dataclass
class InjectedEvent:
    index: int
    level: int
    request_t: float
    anchor_s: float | None
    end_s: float | None
    kind: str
    track_index: int | None
    served: bool


def make_schedule(total_s: float, seed: int, per_level: int = PER_LEVEL,
                  min_gap_s: float = SCHEDULE_MIN_GAP_S) -> list[tuple[float, int]]:
    """Randomly ordered levels at random times with a guaranteed minimum gap."""
    levels = [lv for lv in (1, 2, 3) for _ in range(per_level)]
    n = len(levels)
    lo = SCHEDULE_LEAD_IN_S
    hi = total_s - SCHEDULE_TAIL_S
    slack = (hi - lo) - min_gap_s * (n - 1)
    if slack <= 0:
        raise ValueError(
            f"playlist too short for {n} events {min_gap_s:.0f}s apart: "
            f"needs > {lo + SCHEDULE_TAIL_S + min_gap_s * (n - 1):.0f}s")
    rng = np.random.default_rng(seed)
    rng.shuffle(levels)
    offs = np.sort(rng.uniform(0.0, slack, n))
    times = lo + offs + min_gap_s * np.arange(n)
    return [(float(t), int(lv)) for t, lv in zip(times, levels)]


def control_tone(sample_rate: int) -> np.ndarray:
    n = int(round(CONTROL_TONE_S * sample_rate))
    t = np.arange(n) / sample_rate
    amp = 10.0 ** (CONTROL_TONE_DBFS / 20.0)
    env = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    return amp * env * np.sin(2 * np.pi * CONTROL_TONE_HZ * t)


def _concat_reference(entries) -> tuple[np.ndarray, int]:
    rates = {tr.waveform.sample_rate for tr, _ in entries}
    if len(rates) != 1:
        raise ValueError("playlist tracks must share one sample rate")
    rate = rates.pop()
    chans = max(tr.waveform.channels for tr, _ in entries)
    parts = []
    for tr, _ in entries:
        s = tr.waveform.samples
        if s.ndim == 1:
            s = s[:, None]
        if s.shape[1] < chans:
            s = np.repeat(s, chans, axis=1)
        parts.append(s)
    return np.concatenate(parts, axis=0), rate


def run_inject(entries: list[tuple[AudioTrack, AnalysisProfile]],
               out_dir: str | Path, seed: int = 0, control: bool = False,
               config: SessionConfig | None = None) -> dict:
    """Render a playlist with scheduled notifications; write the closure bundle.

    Writes modified.wav, reference.wav, and manifest.json into out_dir.
    In control mode the music is left untouched and each event is a fixed
    880 Hz half-second tone instead of a musical edit.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reference, rate = _concat_reference(entries)
    total_s = reference.shape[0] / rate
    schedule = make_schedule(total_s, seed)
    cfg = config or SessionConfig(seed=seed)

    events: list[InjectedEvent] = []
    if control:
        rendered = reference.copy()
        tone = control_tone(rate)
        for k, (t, lv) in enumerate(schedule):
            anchor = t + cfg.lead_s
            a = int(round(anchor * rate))
            b = min(a + len(tone), rendered.shape[0])
            rendered[a:b] += tone[:b - a, None]
            events.append(InjectedEvent(k, lv, t, anchor,
                                        anchor + CONTROL_TONE_S,
                                        "control_tone", None, True))
        log = SessionLog(out_dir / "session.log")
        log.emit("SESSION_START", tracks=len(entries), realtime=False,
                 lead_s=cfg.lead_s, min_spacing_s=cfg.min_spacing_s,
                 seed=seed)
        for k, (t, lv) in enumerate(schedule):
            log.emit("NOTIFY", level=lv, source="inject", stream_t=t)
            log.emit("EDIT", kind="control_tone", level=lv,
                     category="control", stream_t=t + cfg.lead_s,
                     orig_s=t + cfg.lead_s, merged=1, source="inject",
                     degraded=False, detail=f"tone_hz={CONTROL_TONE_HZ:g}")
        log.emit("SESSION_STOP", stream_s=total_s, notified=len(schedule),
                 edits=len(schedule), unserved=0, dropped=0)
        log.close()
    else:
        fired = [False] * len(schedule)

        def hook(sess: Session, t: float) -> None:
            for k, (when, lv) in enumerate(schedule):
                if not fired[k] and t >= when:
                    fired[k] = True
                    sess.request(lv, source="inject")

        sink = CaptureSink()
        sess = Session(entries, sink, SessionLog(out_dir / "session.log"),
                       cfg, tick_hook=hook)
        sess.run()
        rendered = sink.result()
        outcomes = list(sess.outcomes)
        for k, (t, lv) in enumerate(schedule):
            if k < len(outcomes) and outcomes[k][0] == "edit":
                ti, rec = outcomes[k][1]
                t0 = sess.track_offsets[ti]
                events.append(InjectedEvent(
                    k, lv, t, t0 + rec.buffer_start / rate,
                    t0 + rec.buffer_end / rate, rec.plan.kind.value, ti, True))
            else:
                events.append(InjectedEvent(k, lv, t, None, None,
                                            "unserved", None, False))

    save_wav(out_dir / "modified.wav", Waveform(
        rendered[:, 0] if rendered.shape[1] == 1 else rendered, rate))
    save_wav(out_dir / "reference.wav", Waveform(
        reference[:, 0] if reference.shape[1] == 1 else reference, rate))
    manifest = {
        "seed": seed,
        "control": control,
        "sample_rate": rate,
        "total_s": total_s,
        "tracks": [str(tr.path) for tr, _ in entries],
        "events": [asdict(e) for e in events],
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
