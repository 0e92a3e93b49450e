"""songcue: deliver notifications as genre-aware edits to streaming music."""

__version__ = "0.1.0"
