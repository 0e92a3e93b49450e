"""Genre categories, the keyword map, and the rhythm/repetition decision tree."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class GenreCategory(str, Enum):
    CLASSICAL = "classical"
    BLUES = "blues"
    JAZZ = "jazz"
    POP = "pop"


# editorial keyword -> category map; keys are normalized (lowercase, hyphenated)
KEYWORD_MAP: dict[str, GenreCategory] = {
    "classical": GenreCategory.CLASSICAL,
    "rhythmless-instrumental": GenreCategory.CLASSICAL,
    "choir": GenreCategory.CLASSICAL,
    "avant-garde": GenreCategory.CLASSICAL,
    "soundtrack": GenreCategory.CLASSICAL,
    "blues": GenreCategory.BLUES,
    "rock": GenreCategory.BLUES,
    "hip-hop": GenreCategory.BLUES,
    "r&b": GenreCategory.BLUES,
    "soul": GenreCategory.BLUES,
    "strong-rhythmic": GenreCategory.BLUES,
    "disco": GenreCategory.BLUES,
    "rap": GenreCategory.BLUES,
    "jazz": GenreCategory.JAZZ,
    "rhythmic-instrumental": GenreCategory.JAZZ,
    "electronic": GenreCategory.JAZZ,
    "easy-listening": GenreCategory.JAZZ,
    "pop": GenreCategory.POP,
    "country": GenreCategory.POP,
    "folk": GenreCategory.POP,
    "latin": GenreCategory.POP,
    "gospel": GenreCategory.POP,
}


def normalize_keyword(keyword: str) -> str:
    return keyword.strip().lower().replace("_", "-").replace(" ", "-")


def classify_keyword(keyword: str) -> GenreCategory:
    """Map an editorial genre keyword to its edit category."""
    key = normalize_keyword(keyword)
    if key not in KEYWORD_MAP:
        valid = ", ".join(sorted(KEYWORD_MAP))
        raise ValueError(f"unknown genre keyword {keyword!r}; valid keywords: {valid}")
    return KEYWORD_MAP[key]


@dataclass
class AutoSortThresholds:
    """Tunable cut points for the automatic category decision tree.

    strong/extreme onset levels are in envelope units after per-track mean
    normalization of the percussive onset envelope.
    """

    strong_onset: float = 1.0       # r1
    extreme_onset: float = 3.0      # r2
    rhythmic_fraction: float = 0.5  # s1: beats at/above strong_onset
    extreme_fraction: float = 0.25  # s2: beats at/above extreme_onset
    min_unique_candidates: int = 12  # p1: repetition evidence


@dataclass
class RhythmStats:
    """Evidence the decision tree consumes; computed by the preprocessing pipeline."""

    strong_fraction: float
    extreme_fraction: float
    unique_jump_pairs: int


def categorize(stats: RhythmStats,
               thresholds: AutoSortThresholds | None = None) -> GenreCategory:
    """Decision tree: strongly-rhythmic -> Blues; rhythmic and repetitive -> Pop;
    rhythmic only -> Jazz; otherwise Classical."""
    th = thresholds or AutoSortThresholds()
    rhythmic = stats.strong_fraction >= th.rhythmic_fraction
    strongly = rhythmic and stats.extreme_fraction >= th.extreme_fraction
    repetitive = stats.unique_jump_pairs >= th.min_unique_candidates
    if strongly:
        return GenreCategory.BLUES
    if rhythmic and repetitive:
        return GenreCategory.POP
    if rhythmic:
        return GenreCategory.JAZZ
    return GenreCategory.CLASSICAL
