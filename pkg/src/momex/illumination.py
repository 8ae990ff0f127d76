"""Best magnetism per cell under rising minimum-stability thresholds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .archive import MomeArchive

DEFAULT_LEVELS = (0.0, 0.5, 0.85, 0.9, 0.95)


@dataclass
class IlluminationTable:
    levels: list
    thresholds: list
    # one dict per level: cell -> best secondary objective (absent = empty cell)
    values: list

    def populated(self, level_index: int) -> set:
        return set(self.values[level_index])


def illuminate(
    archive: MomeArchive,
    levels: Sequence[float] = DEFAULT_LEVELS,
    primary: int = 0,
    secondary: int = 1,
) -> IlluminationTable:
    """Per-cell maximum of ``secondary`` among solutions clearing each threshold.

    A level of 0.9 means a threshold 90% of the way from the archive's
    minimum to its maximum value of ``primary``.
    """
    solutions = list(archive.solutions())
    if not solutions:
        raise ValueError("cannot illuminate an empty archive")
    if any(not 0.0 <= lv <= 1.0 for lv in levels):
        raise ValueError("levels must lie in [0, 1]")
    f_min = min(s.objectives[primary] for _, s in solutions)
    f_max = max(s.objectives[primary] for _, s in solutions)
    thresholds, values = [], []
    for lv in levels:
        # level 1 must admit the maximiser despite rounding in the interpolation
        thr = f_max if lv == 1.0 else f_min + lv * (f_max - f_min)
        best: dict[int, float] = {}
        for cell, s in solutions:
            if s.objectives[primary] >= thr:
                v = s.objectives[secondary]
                if cell not in best or v > best[cell]:
                    best[cell] = v
        thresholds.append(thr)
        values.append(best)
    return IlluminationTable(list(levels), thresholds, values)
