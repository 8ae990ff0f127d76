"""Simplified crystal structure matching and the reference re-discovery check.

No Niggli reduction or supercell search: both structures must hold the same
atoms in cells of comparable shape.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scipy.optimize import minimize_scalar

from .archive import MomeArchive, assign_cell
from .domain import (
    CrystalGenotype,
    DomainParams,
    evaluate,
    lj_energy,
    nearest_neighbor_distances,
    template_structure,
)


@dataclass(frozen=True)
class MatchTolerances:
    ltol: float = 0.2
    atol: float = 5.0
    stol: float = 0.3

    def __post_init__(self) -> None:
        if min(self.ltol, self.atol, self.stol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ReferenceStructure:
    name: str
    genotype: CrystalGenotype
    objectives: tuple | None = None


def hcp_structure(n_atoms: int, species: Sequence[str], volume_per_atom: float) -> CrystalGenotype:
    """Ideal-c/a hexagonal close packing, 2 x 2 x m hexagonal cells."""
    if n_atoms % 8:
        raise ValueError("hcp builder needs a multiple of 8 atoms")
    m = n_atoms // 8
    basis = np.array([[1 / 3, 2 / 3, 0.25], [2 / 3, 1 / 3, 0.75]])
    cells = np.array([(i, j, k) for i in range(2) for j in range(2) for k in range(m)])
    frac = ((cells[:, None, :] + basis[None, :, :]) / np.array([2.0, 2.0, m])).reshape(-1, 3)
    # hexagonal cell volume with c = sqrt(8/3) a is sqrt(2) a^3, holding 2 atoms
    a = (2.0 * volume_per_atom / math.sqrt(2.0)) ** (1.0 / 3.0)
    c = math.sqrt(8.0 / 3.0) * a
    return CrystalGenotype([2 * a, 2 * a, m * c], [90.0, 90.0, 120.0], frac, list(species))


def relaxed_spacing(build, params: DomainParams, bracket=(5.0, 40.0)) -> CrystalGenotype:
    """Isotropically rescale ``build(volume_per_atom)`` to its energy minimum."""
    res = minimize_scalar(
        lambda v: lj_energy(build(v), params), bounds=bracket, method="bounded",
        options={"xatol": 1e-10},
    )
    return build(float(res.x))


def default_references(params: DomainParams) -> list[ReferenceStructure]:
    """FCC and HCP packings of the run's atoms at their energy-minimising density."""
    n, species = params.n_atoms, params.species_list
    return [
        ReferenceStructure(
            "fcc", relaxed_spacing(lambda v: template_structure("fcc", n, species, v), params)
        ),
        ReferenceStructure("hcp", relaxed_spacing(lambda v: hcp_structure(n, species, v), params)),
    ]


def mean_nn_distance(g: CrystalGenotype) -> float:
    return float(np.mean(nearest_neighbor_distances(g)))


def _lattice_close(a: CrystalGenotype, b: CrystalGenotype, tol: MatchTolerances) -> bool:
    la, lb = np.sort(a.lengths), np.sort(b.lengths)
    if np.any(np.abs(la - lb) > tol.ltol * lb):
        return False
    return bool(np.all(np.abs(np.sort(a.angles) - np.sort(b.angles)) <= tol.atol))


def _sites_match(a: CrystalGenotype, b: CrystalGenotype, stol: float) -> bool:
    """Origin shift plus greedy species-preserving assignment of a's sites onto b's."""
    limit = stol * mean_nn_distance(b)
    lattice = b.lattice
    counts = Counter(a.species)
    anchor_species = min(counts, key=lambda s: (counts[s], s))
    anchor = a.species.index(anchor_species)
    b_species = np.array(b.species)
    for target in np.flatnonzero(b_species == anchor_species):
        shifted = a.frac + (b.frac[target] - a.frac[anchor])
        free = np.ones(b.n_atoms, dtype=bool)
        ok = True
        for i in range(a.n_atoms):
            candidates = np.flatnonzero(free & (b_species == a.species[i]))
            d = b.frac[candidates] - shifted[i]
            d -= np.round(d)
            dist = np.linalg.norm(d @ lattice, axis=1)
            k = int(np.argmin(dist))
            if dist[k] > limit:
                ok = False
                break
            free[candidates[k]] = False
        if ok:
            return True
    return False


def _axis_permutations(a: CrystalGenotype, b: CrystalGenotype, tol: MatchTolerances):
    """Relabellings of a's axes whose lengths line up with b's."""
    for perm in itertools.permutations(range(3)):
        p = list(perm)
        lengths = a.lengths[p]
        if np.any(np.abs(lengths - b.lengths) > tol.ltol * b.lengths):
            continue
        yield CrystalGenotype(lengths, a.angles[p], a.frac[:, p], a.species)


def _one_way(a: CrystalGenotype, b: CrystalGenotype, tol: MatchTolerances) -> bool:
    return any(_sites_match(ap, b, tol.stol) for ap in _axis_permutations(a, b, tol))


def structures_match(a: CrystalGenotype, b: CrystalGenotype, tol: MatchTolerances = MatchTolerances()) -> bool:
    if Counter(a.species) != Counter(b.species):
        return False
    if not _lattice_close(a, b, tol) or not _lattice_close(b, a, tol):
        return False
    return _one_way(a, b, tol) and _one_way(b, a, tol)


@dataclass
class ReferenceMatch:
    name: str
    cell: int
    matches: list = field(default_factory=list)
    outperforms_stability: bool = False
    outperforms_magnetism: bool = False

    @property
    def count(self) -> int:
        return len(self.matches)


def match_archive(
    archive: MomeArchive,
    references: Sequence[ReferenceStructure],
    params: DomainParams,
    tol: MatchTolerances = MatchTolerances(),
) -> list[ReferenceMatch]:
    """Match every reference against the solutions stored in its own cell."""
    report = []
    for ref in references:
        scored = evaluate(ref.genotype, params)
        objectives = ref.objectives if ref.objectives is not None else scored.objectives
        cell = assign_cell(scored.features, archive.tessellation)
        entry = ReferenceMatch(ref.name, cell)
        front = archive.cells.get(cell, [])
        for s in front:
            if structures_match(s.genotype, ref.genotype, tol):
                entry.matches.append(s.uid)
            if s.objectives[0] > objectives[0]:
                entry.outperforms_stability = True
            if s.objectives[1] > objectives[1]:
                entry.outperforms_magnetism = True
        report.append(entry)
    return report
