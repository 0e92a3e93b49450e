"""Beat-to-beat jump graph over self-similar positions in a track."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dsp import EPS, MFCCMatrix, Spectrogram

MIN_BEAT_SEPARATION = 4
# fraction of the median pairwise feature distance below which two beats
# count as the same musical material
THRESHOLD_FRACTION = 0.2


@dataclass
class JumpGraph:
    """Sparse candidate map: beat index -> ascending list of jump target indices."""

    candidates: dict[int, list[int]] = field(default_factory=dict)
    threshold: float = 0.0
    n_beats: int = 0

    def unique_pairs(self) -> int:
        seen = set()
        for i, targets in self.candidates.items():
            for j in targets:
                seen.add((min(i, j), max(i, j)))
        return len(seen)

    def total_candidates(self) -> int:
        return sum(len(v) for v in self.candidates.values())


def _fold_chroma(mags: np.ndarray, bin_freqs: np.ndarray) -> np.ndarray:
    """12-bin folded spectrum: each bin's magnitude lands on its pitch class."""
    valid = bin_freqs > 0
    pcs = np.mod(np.round(12.0 * np.log2(bin_freqs[valid] / 440.0)), 12).astype(int)
    chroma = np.zeros((mags.shape[0], 12))
    sub = mags[:, valid]
    for pc in range(12):
        sel = pcs == pc
        if sel.any():
            chroma[:, pc] = sub[:, sel].sum(axis=1)
    norm = chroma.sum(axis=1, keepdims=True)
    return chroma / np.maximum(norm, EPS)


def beat_features(mfcc: MFCCMatrix, spec: Spectrogram,
                  beats_samples: np.ndarray) -> np.ndarray:
    """Per-beat feature rows: span-mean MFCC plus span-mean folded chroma."""
    hop = mfcc.hop_length
    frames = np.asarray(beats_samples, dtype=np.int64) // hop
    n_frames = min(mfcc.n_frames, spec.n_frames)
    frames = np.clip(frames, 0, n_frames - 1)
    chroma = _fold_chroma(spec.magnitudes[:n_frames], spec.bin_frequencies)
    rows = []
    for k in range(len(frames)):
        start = frames[k]
        stop = frames[k + 1] if k + 1 < len(frames) else n_frames
        stop = max(stop, start + 1)
        rows.append(np.concatenate([
            mfcc.coeffs[start:stop].mean(axis=0),
            chroma[start:stop].mean(axis=0),
        ]))
    return np.asarray(rows)


def build_jump_graph(mfcc: MFCCMatrix, spec: Spectrogram, beats_samples: np.ndarray,
                     threshold: float | None = None,
                     min_separation: int = MIN_BEAT_SEPARATION,
                     threshold_fraction: float = THRESHOLD_FRACTION) -> JumpGraph:
    """Candidates are beat pairs closer than the similarity threshold and at
    least min_separation beats apart; the default threshold adapts to the
    track's own feature-distance scale."""
    n = len(beats_samples)
    if n < 2:
        return JumpGraph({}, 0.0, n)
    feats = beat_features(mfcc, spec, np.asarray(beats_samples))
    mean = feats.mean(axis=0)
    std = np.maximum(feats.std(axis=0), EPS)
    z = (feats - mean) / std

    dist = cdist(z, z)
    idx = np.arange(n)
    apart = np.abs(idx[:, None] - idx[None, :]) >= min_separation
    if not apart.any():
        return JumpGraph({}, 0.0, n)
    if threshold is None:
        threshold = threshold_fraction * float(np.median(dist[apart]))

    candidates: dict[int, list[int]] = {}
    for i in range(n):
        targets = np.where(apart[i] & (dist[i] <= threshold))[0]
        if targets.size:
            candidates[int(i)] = [int(j) for j in targets]
    return JumpGraph(candidates, float(threshold), n)
