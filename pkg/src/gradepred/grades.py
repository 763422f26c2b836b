"""Grade scale and academic term ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LETTER_POINTS: dict[str, float] = {
    "A": 4.0,
    "A-": 3.67,
    "B+": 3.33,
    "B": 3.0,
    "B-": 2.67,
    "C+": 2.33,
    "C": 2.0,
    "C-": 1.67,
    "D+": 1.33,
    "D": 1.0,
    "D-": 0.67,
    "F": 0.0,
}

GRADE_GRID = np.array(sorted(LETTER_POINTS.values()))
_POINTS_LETTER = {v: k for k, v in LETTER_POINTS.items()}

SEASONS = ("Spring", "Summer", "Fall")


class GradeError(ValueError):
    """Raised for grade tokens or values outside the configured scale."""


def grade_from_letter(letter: str, table: dict[str, float] | None = None) -> float:
    """Map a letter grade such as ``"B+"`` to grade points."""
    table = LETTER_POINTS if table is None else table
    token = letter.strip().upper()
    try:
        return table[token]
    except KeyError:
        raise GradeError(f"unknown letter grade {letter!r}") from None


def letter_from_grade(points: float) -> str:
    """Inverse of :func:`grade_from_letter` for values on the grid."""
    key = round(float(points), 2)
    try:
        return _POINTS_LETTER[key]
    except KeyError:
        raise GradeError(f"{points!r} is not on the grade grid") from None


def round_to_grid(values) -> np.ndarray:
    """Snap real values to the nearest grade-grid point (clipped to [0, 4])."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 4.0)
    idx = np.searchsorted(GRADE_GRID, v)
    idx = np.clip(idx, 1, len(GRADE_GRID) - 1)
    lo = GRADE_GRID[idx - 1]
    hi = GRADE_GRID[idx]
    return np.where(v - lo <= hi - v, lo, hi)


@dataclass(frozen=True, order=True)
class TermId:
    """A chronologically indexed academic term."""

    index: int
    season: str = ""
    year: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("term index must be non-negative")
        if self.season and self.season not in SEASONS:
            raise ValueError(f"unknown season {self.season!r}")

    @property
    def is_summer(self) -> bool:
        return self.season == "Summer"

    def label(self) -> str:
        if not self.season:
            return str(self.index)
        return f"{self.year % 100:02d} {self.season}"


def term_calendar(n_terms: int, start_season: str = "Summer", start_year: int = 2009) -> list[TermId]:
    """Consecutive terms cycling Spring < Summer < Fall, starting at the given term."""
    s = SEASONS.index(start_season)
    year = start_year
    terms = []
    for i in range(n_terms):
        terms.append(TermId(i, SEASONS[s], year))
        s += 1
        if s == len(SEASONS):
            s = 0
            year += 1
    return terms


def index_terms(labels) -> dict[tuple[int, str], int]:
    """Assign chronological indices to (year, season) pairs."""
    order = sorted(set(labels), key=lambda ys: (ys[0], SEASONS.index(ys[1])))
    return {ys: i for i, ys in enumerate(order)}
