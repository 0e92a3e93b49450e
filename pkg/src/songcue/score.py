"""Closure check: find modified regions by exact comparison, score the manifest.

Outside an edit the rendered stream is a bit-exact copy of the reference, so
any inequality marks a region. Jumps shift the alignment; the detector tracks
the offset and resyncs by searching for a long exact match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

MATCH_WINDOW = 2048
SCAN_STRIDE = 64
MAX_CANDIDATES = 64
MERGE_GAP_S = 1.0
RESPONSE_DELAY_S = 0.5
RESPONSE_WINDOW_S = 5.0


def _first_channel(data: np.ndarray) -> np.ndarray:
    return data[:, 0] if data.ndim == 2 else data


def _advance_equal(rnd: np.ndarray, ref: np.ndarray, i: int,
                   p: int) -> tuple[int, int]:
    """Skip the equal prefix; returns the first mismatch or an array end."""
    n, m = len(rnd), len(ref)
    block = 1 << 16
    while i < n and p < m:
        b = min(block, n - i, m - p)
        ra, rb = rnd[i:i + b], ref[p:p + b]
        if np.array_equal(ra, rb):
            i += b
            p += b
            continue
        k = int(np.nonzero(ra != rb)[0][0])
        return i + k, p + k
    return i, p


def _resync(rnd: np.ndarray, ref: np.ndarray, start: int,
            window: int = MATCH_WINDOW,
            stride: int = SCAN_STRIDE) -> tuple[int, int] | None:
    """First (rendered, reference) pair past start with a window-long exact match."""
    n, m = len(rnd), len(ref)
    j = start
    while j + window <= n:
        v = rnd[j]
        if v != 0:
            cands = np.nonzero(ref == v)[0]
            if 0 < len(cands) <= MAX_CANDIDATES:
                probe = rnd[j:j + window]
                for q in cands:
                    q = int(q)
                    if q + window <= m and np.array_equal(probe,
                                                          ref[q:q + window]):
                        return j, q
        j += stride
    return None


def _tighten(rnd: np.ndarray, ref: np.ndarray, start: int, j: int,
             q: int) -> tuple[int, int]:
    """Walk the resync point back over any equal run it skipped."""
    while j > start and q > 0 and rnd[j - 1] == ref[q - 1]:
        j -= 1
        q -= 1
    return j, q


def find_modified_regions(rendered: np.ndarray, reference: np.ndarray
                          ) -> list[tuple[int, int]]:
    """Half-open sample ranges of the rendered stream that differ."""
    rnd = _first_channel(np.asarray(rendered))
    ref = _first_channel(np.asarray(reference))
    if rnd.dtype != ref.dtype:
        raise ValueError("rendered and reference must share a dtype")
    regions: list[tuple[int, int]] = []
    i, off = 0, 0
    n = len(rnd)
    while i < n:
        i, p = _advance_equal(rnd, ref, i, i + off)
        if i >= n:
            break
        start = i
        found = _resync(rnd, ref, start + 1)
        if found is None:
            regions.append((start, n))
            break
        j, q = _tighten(rnd, ref, start, *found)
        regions.append((start, j))
        i, off = j, q - j
    return regions


def merge_regions(regions: list[tuple[int, int]], sample_rate: int,
                  gap_s: float = MERGE_GAP_S) -> list[tuple[int, int]]:
    if not regions:
        return []
    gap = int(round(gap_s * sample_rate))
    out = [regions[0]]
    for s, e in regions[1:]:
        ps, pe = out[-1]
        if s - pe <= gap:
            out[-1] = (ps, max(pe, e))
        else:
            out.append((s, e))
    return out


# ----- Scoring -----

@dataclass
class ScoreResult:
    per_level: dict
    overall_accuracy: float
    false_positives: int
    regions_s: list[tuple[float, float]]
    responses_s: list[float]

    def to_dict(self) -> dict:
        return {
            "per_level": self.per_level,
            "overall_accuracy": self.overall_accuracy,
            "false_positives": self.false_positives,
            "regions_s": [[round(s, 4), round(e, 4)] for s, e in self.regions_s],
            "responses_s": [round(t, 4) for t in self.responses_s],
        }


def score_events(events: list[dict], regions_s: list[tuple[float, float]]
                 ) -> ScoreResult:
    """A response fires RESPONSE_DELAY_S after each detected region ends; an
    event is hit when the earliest unclaimed response lands within
    RESPONSE_WINDOW_S after the event's end."""
    responses = sorted(e + RESPONSE_DELAY_S for _, e in regions_s)
    claimed = [False] * len(responses)
    per_level: dict[int, dict] = {lv: {"events": 0, "hits": 0}
                                  for lv in (1, 2, 3)}
    hits = 0
    for ev in sorted(events, key=lambda d: d.get("end_s") or float("inf")):
        lv = int(ev["level"])
        per_level[lv]["events"] += 1
        end = ev.get("end_s")
        if end is None:
            continue
        for r, t in enumerate(responses):
            if claimed[r]:
                continue
            if end <= t <= end + RESPONSE_WINDOW_S:
                claimed[r] = True
                per_level[lv]["hits"] += 1
                hits += 1
                break
            if t > end + RESPONSE_WINDOW_S:
                break
    total = sum(d["events"] for d in per_level.values())
    for d in per_level.values():
        d["accuracy"] = (d["hits"] / d["events"]) if d["events"] else 1.0
    return ScoreResult(
        per_level=per_level,
        overall_accuracy=(hits / total) if total else 1.0,
        false_positives=int(np.sum(~np.asarray(claimed, dtype=bool)))
        if responses else 0,
        regions_s=regions_s,
        responses_s=responses)


def load_exact(path: str | Path) -> tuple[int, np.ndarray]:
    """Read a wav without any scaling so exact comparison is meaningful."""
    rate, data = wavfile.read(str(path))
    return int(rate), data


def score_bundle(bundle_dir: str | Path) -> ScoreResult:
    """Run the detector over an inject output directory and score it."""
    bundle = Path(bundle_dir)
    with open(bundle / "manifest.json") as fh:
        manifest = json.load(fh)
    rate_r, rendered = load_exact(bundle / "modified.wav")
    rate_f, reference = load_exact(bundle / "reference.wav")
    if rate_r != rate_f:
        raise ValueError("sample rate mismatch between rendered and reference")
    raw = find_modified_regions(rendered, reference)
    merged = merge_regions(raw, rate_r)
    regions_s = [(s / rate_r, e / rate_r) for s, e in merged]
    return score_events(manifest["events"], regions_s)
