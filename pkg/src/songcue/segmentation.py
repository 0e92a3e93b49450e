"""Section-boundary detection by contiguity-constrained agglomerative clustering."""

from __future__ import annotations

import numpy as np

from .dsp import MFCCMatrix

MIN_SEGMENT_S = 5.0
TARGET_SEGMENT_SPAN_S = 30.0
TARGET_MIN = 2
TARGET_MAX = 12
POOL_BLOCK_S = 0.25


def target_segment_count(duration_s: float) -> int:
    return int(np.clip(round(duration_s / TARGET_SEGMENT_SPAN_S), TARGET_MIN, TARGET_MAX))


def _pool_blocks(coeffs: np.ndarray, frames_per_block: int) -> np.ndarray:
    n = coeffs.shape[0]
    n_blocks = max(n // frames_per_block, 1)
    trimmed = coeffs[:n_blocks * frames_per_block]
    return trimmed.reshape(n_blocks, frames_per_block, -1).mean(axis=1)


def _ward_adjacent_merge(blocks: np.ndarray, n_clusters: int) -> list[int]:
    """Merge only adjacent clusters, smallest Ward cost first, lowest index on ties.

    Returns the starting block index of each final cluster (ascending).
    """
    counts = [1] * blocks.shape[0]
    means = [blocks[i].copy() for i in range(blocks.shape[0])]
    starts = list(range(blocks.shape[0]))
    while len(counts) > n_clusters:
        best_cost = None
        best_i = -1
        for i in range(len(counts) - 1):
            n1, n2 = counts[i], counts[i + 1]
            d = means[i] - means[i + 1]
            cost = (n1 * n2) / (n1 + n2) * float(d @ d)
            if best_cost is None or cost < best_cost - 1e-15:
                best_cost = cost
                best_i = i
        i = best_i
        n1, n2 = counts[i], counts[i + 1]
        means[i] = (n1 * means[i] + n2 * means[i + 1]) / (n1 + n2)
        counts[i] = n1 + n2
        del counts[i + 1], means[i + 1], starts[i + 1]
    return starts


def segment_bounds(mfcc: MFCCMatrix, duration_s: float,
                   n_segments: int | None = None,
                   min_segment_s: float = MIN_SEGMENT_S,
                   pool_block_s: float = POOL_BLOCK_S) -> np.ndarray:
    """Segment start positions as sample indices; always begins with 0.

    Tracks shorter than two minimum segments are a single segment.
    """
    if duration_s < 2.0 * min_segment_s:
        return np.zeros(1, dtype=np.int64)
    if n_segments is None:
        n_segments = target_segment_count(duration_s)

    fr = mfcc.sample_rate / mfcc.hop_length
    frames_per_block = max(int(round(pool_block_s * fr)), 1)
    blocks = _pool_blocks(np.asarray(mfcc.coeffs, dtype=np.float64), frames_per_block)
    n_segments = min(n_segments, blocks.shape[0])
    starts = _ward_adjacent_merge(blocks, n_segments)

    block_samples = frames_per_block * mfcc.hop_length
    min_gap = int(round(min_segment_s * mfcc.sample_rate))
    track_samples = int(round(duration_s * mfcc.sample_rate))
    bounds = [0]
    for s in starts[1:]:
        pos = s * block_samples
        if pos - bounds[-1] >= min_gap and track_samples - pos >= min_gap:
            bounds.append(pos)
    return np.asarray(bounds, dtype=np.int64)
