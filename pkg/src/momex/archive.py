"""CVT tessellation and the archives built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .pareto import InsertOutcome, InsertStatus, ParetoFront

SCALAR_RULES = ("stability", "magnetism", "sum")


@dataclass
class CvtTessellation:
    centroids: np.ndarray
    bounds: tuple
    seed: int = 0

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=float)
        self.bounds = tuple(tuple(float(x) for x in b) for b in self.bounds)

    def __len__(self) -> int:
        return len(self.centroids)

    def assign(self, features: Sequence[float]) -> int:
        return assign_cell(features, self)


def build_cvt(
    c: int,
    bounds: Sequence[Sequence[float]],
    n_samples: int,
    seed: int,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> CvtTessellation:
    """Lloyd's k-means on uniform samples; deterministic for a given seed."""
    if c < 1:
        raise ValueError("need at least one cell")
    if c > n_samples:
        raise ValueError(f"cannot place {c} centroids with {n_samples} samples")
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=(n_samples, len(lo)))
    centroids = x[rng.choice(n_samples, size=c, replace=False)].copy()
    for _ in range(max_iter):
        _, labels = cKDTree(centroids).query(x)
        counts = np.bincount(labels, minlength=c)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        new = centroids.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        shift = np.max(np.linalg.norm(new - centroids, axis=1))
        centroids = new
        if shift < tol:
            break
    return CvtTessellation(centroids, tuple(zip(lo, hi)), seed)


def assign_cell(features: Sequence[float], tessellation: CvtTessellation) -> int:
    d2 = np.sum((tessellation.centroids - np.asarray(features, dtype=float)) ** 2, axis=1)
    # argmin returns the first minimum, giving the lowest-index tie rule
    return int(np.argmin(d2))


class MomeArchive:
    """One bounded Pareto front per CVT cell."""

    def __init__(self, tessellation: CvtTessellation, max_front_size: int = 10):
        self.tessellation = tessellation
        self.max_front_size = max_front_size
        self.cells: dict[int, ParetoFront] = {}

    def __len__(self) -> int:
        return sum(len(f) for f in self.cells.values())

    @property
    def n_cells(self) -> int:
        return len(self.tessellation)

    def insert(self, s) -> InsertOutcome:
        cell = assign_cell(s.features, self.tessellation)
        front = self.cells.get(cell)
        if front is None:
            front = self.cells[cell] = ParetoFront(self.max_front_size)
        outcome = front.insert(s)
        outcome.cell = cell
        if not front:
            del self.cells[cell]
        return outcome

    def fronts(self) -> Iterator[tuple[int, ParetoFront]]:
        for cell in sorted(self.cells):
            if self.cells[cell]:
                yield cell, self.cells[cell]

    def solutions(self) -> Iterator[tuple[int, object]]:
        for cell, front in self.fronts():
            for s in front:
                yield cell, s

    def non_empty_cells(self) -> list[int]:
        return [cell for cell, _ in self.fronts()]


def archive_insert(archive: MomeArchive, s) -> InsertOutcome:
    return archive.insert(s)


def scalar_fitness(objectives: Sequence[float], rule: str) -> float:
    if rule == "stability":
        return float(objectives[0])
    if rule == "magnetism":
        return float(objectives[1])
    if rule == "sum":
        return float(objectives[0] + objectives[1])
    raise ValueError(f"unknown scalar rule {rule!r}; expected one of {SCALAR_RULES}")


class MapElitesArchive:
    """At most one elite per cell, ranked by a scalarised objective."""

    def __init__(self, tessellation: CvtTessellation, rule: str):
        if rule not in SCALAR_RULES:
            raise ValueError(f"unknown scalar rule {rule!r}")
        self.tessellation = tessellation
        self.rule = rule
        self.cells: dict[int, object] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def fitness(self, s) -> float:
        return scalar_fitness(s.objectives, self.rule)

    def insert(self, s) -> InsertOutcome:
        cell = assign_cell(s.features, self.tessellation)
        incumbent = self.cells.get(cell)
        if incumbent is None:
            self.cells[cell] = s
            return InsertOutcome(InsertStatus.ADDED, cell=cell)
        if self.fitness(s) > self.fitness(incumbent):
            self.cells[cell] = s
            return InsertOutcome(InsertStatus.ADDED_WITH_EVICTION, evicted=incumbent, cell=cell)
        return InsertOutcome(InsertStatus.DISCARDED, cell=cell)

    def solutions(self) -> Iterator[tuple[int, object]]:
        for cell in sorted(self.cells):
            yield cell, self.cells[cell]

    def qd_score(self) -> float:
        return float(sum(self.fitness(s) for s in self.cells.values()))


def me_insert(archive: MapElitesArchive, s) -> InsertOutcome:
    return archive.insert(s)


def passive_sync(passive: MomeArchive, source: MapElitesArchive) -> int:
    """Offer every elite of ``source`` to ``passive``; returns how many were kept."""
    return sum(1 for _, s in source.solutions() if passive.insert(s).inserted)
