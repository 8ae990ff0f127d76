"""Dominance, bounded Pareto fronts, 2-D hypervolume and crowding distance.

Everything here uses the maximization convention.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np


class InsertStatus(enum.Enum):
    ADDED = "added"
    ADDED_WITH_EVICTION = "added_with_eviction"
    DISCARDED = "discarded"


@dataclass
class InsertOutcome:
    status: InsertStatus
    evicted: Any = None
    cell: int | None = None

    @property
    def inserted(self) -> bool:
        return self.status is not InsertStatus.DISCARDED


def objective_vector(values: Sequence[float], k: int | None = None) -> tuple[float, ...]:
    """Validate and freeze an objective vector."""
    vec = tuple(float(v) for v in values)
    if k is not None and len(vec) != k:
        raise ValueError(f"expected {k} objectives, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise ValueError(f"objective vector must be finite: {vec}")
    return vec


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    strictly_better = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            strictly_better = True
    return strictly_better


def hypervolume2d(front: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Exact area of the union of boxes spanned by ``ref`` and each point.

    Points worse than ``ref`` on an objective are clipped onto it and so
    contribute nothing.
    """
    if len(ref) != 2:
        raise ValueError("hypervolume2d only supports two objectives")
    if len(front) == 0:
        return 0.0
    pts = np.asarray(front, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("hypervolume2d only supports two objectives")
    r0, r1 = float(ref[0]), float(ref[1])
    pts = np.maximum(pts, [r0, r1])
    # descending on objective 0, then descending on objective 1
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    area = 0.0
    top = r1
    for x, y in pts[order]:
        if y > top:
            area += (x - r0) * (y - top)
            top = y
    return float(area)


def crowding_distances(front: Sequence[Sequence[float]]) -> list[float]:
    pts = np.asarray(front, dtype=float)
    n = len(pts)
    if n == 0:
        return []
    if n == 1:
        return [math.inf]
    dist = np.zeros(n)
    for m in range(pts.shape[1]):
        order = np.argsort(pts[:, m], kind="stable")
        lo, hi = pts[order[0], m], pts[order[-1], m]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = hi - lo
        if span == 0.0:
            continue
        for pos in range(1, n - 1):
            idx = order[pos]
            dist[idx] += (pts[order[pos + 1], m] - pts[order[pos - 1], m]) / span
    return dist.tolist()


def non_dominated(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the non-dominated points; among exact duplicates keeps the first."""
    keep = []
    for i, p in enumerate(points):
        if any(dominates(q, p) for q in points):
            continue
        if any(tuple(points[j]) == tuple(p) for j in keep):
            continue
        keep.append(i)
    return keep


def non_dominated_2d(points: Sequence[Sequence[float]]) -> list[int]:
    """Same result as :func:`non_dominated` for two objectives, in O(n log n)."""
    if len(points) == 0:
        return []
    pts = np.asarray(points, dtype=float)
    # descending on both objectives; index breaks exact ties so the first copy wins
    order = np.lexsort((np.arange(len(pts)), -pts[:, 1], -pts[:, 0]))
    keep = []
    best1 = -math.inf
    for idx in order:
        if pts[idx, 1] > best1:
            keep.append(int(idx))
            best1 = pts[idx, 1]
    return sorted(keep)


@dataclass
class ParetoFront:
    """A bounded set of mutually non-dominated solutions.

    Stored items only need an ``objectives`` attribute. On overflow the member
    with the smallest crowding distance is evicted, oldest first on ties.
    """

    max_size: int
    solutions: list = field(default_factory=list)
    _order: list = field(default_factory=list, repr=False)
    _counter: itertools.count = field(default_factory=itertools.count, repr=False)

    def __post_init__(self) -> None:
        if self.max_size < 1:
            raise ValueError("max_size must be positive")
        if self.solutions and not self._order:
            self._order = [next(self._counter) for _ in self.solutions]

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    @property
    def objectives(self) -> list[tuple[float, ...]]:
        return [tuple(s.objectives) for s in self.solutions]

    def hypervolume(self, ref: Sequence[float]) -> float:
        return hypervolume2d(self.objectives, ref)

    def insert(self, s) -> InsertOutcome:
        new = tuple(s.objectives)
        for member in self.solutions:
            old = tuple(member.objectives)
            if old == new or dominates(old, new):
                return InsertOutcome(InsertStatus.DISCARDED)

        kept = [
            (sol, order)
            for sol, order in zip(self.solutions, self._order)
            if not dominates(new, tuple(sol.objectives))
        ]
        kept.append((s, next(self._counter)))
        self.solutions = [sol for sol, _ in kept]
        self._order = [order for _, order in kept]

        if len(self.solutions) <= self.max_size:
            return InsertOutcome(InsertStatus.ADDED)

        dist = crowding_distances(self.objectives)
        victim = min(range(len(dist)), key=lambda i: (dist[i], self._order[i]))
        evicted = self.solutions.pop(victim)
        self._order.pop(victim)
        if evicted is s:
            return InsertOutcome(InsertStatus.DISCARDED)
        return InsertOutcome(InsertStatus.ADDED_WITH_EVICTION, evicted=evicted)


def front_insert(front: ParetoFront, s) -> InsertOutcome:
    return front.insert(s)
