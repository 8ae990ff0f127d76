"""Analytic toy crystal domain.

Structures are periodic unit cells of Lennard-Jones atoms. Stability is the
negative shifted-LJ energy; "magnetism" is a moment sum damped by a smooth
coordination count so that dense packings score low on it. The two feature
descriptors are the mean nearest-neighbour distance and the volume per atom.

Cartesian positions use the row-vector convention ``cart = frac @ lattice``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

from .pareto import objective_vector


class OverlapError(ValueError):
    """Two atoms closer than the hard overlap distance."""


class NotApplicableError(ValueError):
    """Operator cannot act on this genotype."""


# --------------------------------------------------------------------------
# genotype


def lattice_matrix(lengths: Sequence[float], angles: Sequence[float]) -> np.ndarray:
    """Rows are the lattice vectors a, b, c (a along x, b in the xy plane)."""
    a, b, c = (float(x) for x in lengths)
    alpha, beta, gamma = (math.radians(float(x)) for x in angles)
    ca, cb, cg = math.cos(alpha), math.cos(beta), math.cos(gamma)
    sg = math.sin(gamma)
    cy = (ca - cb * cg) / sg
    cz2 = 1.0 - cb * cb - cy * cy
    if cz2 <= 0.0:
        raise ValueError(f"lattice angles {tuple(angles)} do not form a cell")
    return np.array(
        [
            [a, 0.0, 0.0],
            [b * cg, b * sg, 0.0],
            [c * cb, c * cy, c * math.sqrt(cz2)],
        ]
    )


def lattice_parameters(lattice: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lat = np.asarray(lattice, dtype=float)
    lengths = np.linalg.norm(lat, axis=1)

    def angle(u, v):
        cosv = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        return math.degrees(math.acos(max(-1.0, min(1.0, cosv))))

    angles = np.array([angle(lat[1], lat[2]), angle(lat[0], lat[2]), angle(lat[0], lat[1])])
    return lengths, angles


@dataclass
class CrystalGenotype:
    lengths: np.ndarray
    angles: np.ndarray
    frac: np.ndarray
    species: tuple[str, ...]

    def __post_init__(self) -> None:
        self.lengths = np.asarray(self.lengths, dtype=float).reshape(3)
        self.angles = np.asarray(self.angles, dtype=float).reshape(3)
        self.frac = np.asarray(self.frac, dtype=float).reshape(-1, 3)
        self.species = tuple(str(s) for s in self.species)
        if len(self.species) != len(self.frac):
            raise ValueError("species and coordinates differ in length")

    @property
    def n_atoms(self) -> int:
        return len(self.species)

    @property
    def lattice(self) -> np.ndarray:
        return lattice_matrix(self.lengths, self.angles)

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.lattice)))

    @property
    def cart(self) -> np.ndarray:
        return self.frac @ self.lattice

    def copy(self) -> "CrystalGenotype":
        return CrystalGenotype(
            self.lengths.copy(), self.angles.copy(), self.frac.copy(), self.species
        )

    def to_dict(self) -> dict:
        return {
            "lengths": self.lengths.tolist(),
            "angles": self.angles.tolist(),
            "species": list(self.species),
            "frac": self.frac.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CrystalGenotype":
        return cls(d["lengths"], d["angles"], d["frac"], d["species"])

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "CrystalGenotype":
        return cls.from_dict(json.loads(text))

    def same_as(self, other: "CrystalGenotype") -> bool:
        return (
            self.species == other.species
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.angles, other.angles)
            and np.array_equal(self.frac, other.frac)
        )


def wrap_fractional(frac: np.ndarray) -> np.ndarray:
    out = frac - np.floor(frac)
    out[out >= 1.0] = 0.0
    return out


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class SpeciesParams:
    sigma: float = 2.6
    epsilon: float = 1.0
    moment: float = 1.0


@dataclass
class DomainParams:
    species: dict = field(default_factory=lambda: {"A": SpeciesParams()})
    composition: dict = field(default_factory=lambda: {"A": 8})
    cutoff: float = 6.5
    coordination_cutoff: float = 3.4
    coordination_width: float = 0.1
    feature_bounds: tuple = ((2.0, 4.5), (8.0, 40.0))
    initial_volume: float = 150.0
    initial_volume_spread: float = 0.1
    jitter: float = 0.02
    min_distance_ratio: float = 0.4
    overlap_distance: float = 0.1
    volume_floor_per_atom: float = 0.5
    angle_bounds: tuple = (20.0, 160.0)
    minimum_image: bool = False

    def __post_init__(self) -> None:
        self.species = {
            k: v if isinstance(v, SpeciesParams) else SpeciesParams(**v)
            for k, v in self.species.items()
        }
        self.composition = {k: int(v) for k, v in self.composition.items()}
        self.feature_bounds = tuple(tuple(float(x) for x in b) for b in self.feature_bounds)
        self.angle_bounds = tuple(float(x) for x in self.angle_bounds)
        missing = set(self.composition) - set(self.species)
        if missing:
            raise ValueError(f"no parameters for species {sorted(missing)}")
        if self.cutoff <= 0 or self.n_atoms < 1:
            raise ValueError("cutoff and atom count must be positive")
        names = sorted(self.species)
        self._index = {name: i for i, name in enumerate(names)}
        sig = np.array([self.species[n].sigma for n in names])
        eps = np.array([self.species[n].epsilon for n in names])
        # Lorentz-Berthelot mixing
        self._sigma = 0.5 * (sig[:, None] + sig[None, :])
        self._eps = np.sqrt(eps[:, None] * eps[None, :])
        sr6 = (self._sigma / self.cutoff) ** 6
        self._shift = 4.0 * self._eps * (sr6 * sr6 - sr6)
        self._moment = np.array([self.species[n].moment for n in names])

    @property
    def n_atoms(self) -> int:
        return sum(self.composition.values())

    @property
    def species_list(self) -> list[str]:
        return [name for name in sorted(self.composition) for _ in range(self.composition[name])]

    @property
    def multi_species(self) -> bool:
        return sum(1 for v in self.composition.values() if v > 0) > 1

    def type_indices(self, species: Sequence[str]) -> np.ndarray:
        return np.array([self._index[s] for s in species], dtype=np.int64)

    def pair_sigma(self, s1: str, s2: str) -> float:
        return float(self._sigma[self._index[s1], self._index[s2]])

    def to_dict(self) -> dict:
        return {
            "species": {
                k: {"sigma": v.sigma, "epsilon": v.epsilon, "moment": v.moment}
                for k, v in sorted(self.species.items())
            },
            "composition": dict(sorted(self.composition.items())),
            "cutoff": self.cutoff,
            "coordination_cutoff": self.coordination_cutoff,
            "coordination_width": self.coordination_width,
            "feature_bounds": [list(b) for b in self.feature_bounds],
            "initial_volume": self.initial_volume,
            "initial_volume_spread": self.initial_volume_spread,
            "jitter": self.jitter,
            "min_distance_ratio": self.min_distance_ratio,
            "overlap_distance": self.overlap_distance,
            "volume_floor_per_atom": self.volume_floor_per_atom,
            "angle_bounds": list(self.angle_bounds),
            "minimum_image": self.minimum_image,
        }


def check_genotype(g: CrystalGenotype, params: DomainParams) -> str | None:
    """Return a reason string if ``g`` breaks the cell rules, else None."""
    lo, hi = params.angle_bounds
    if np.any(g.lengths <= 0):
        return "non-positive lattice length"
    if np.any(g.angles <= lo) or np.any(g.angles >= hi):
        return "lattice angle out of bounds"
    try:
        vol = g.volume
    except ValueError:
        return "angles do not form a cell"
    if vol < params.volume_floor_per_atom * g.n_atoms:
        return "cell volume below floor"
    return None


# --------------------------------------------------------------------------
# numba kernels


def _image_translations(lattice: np.ndarray, inv_lattice: np.ndarray, rmax: float) -> tuple[np.ndarray, int]:
    """Cartesian lattice translations that can bring a wrapped pair within ``rmax``."""
    # the cell height along axis i is 1 / |i-th reciprocal vector|
    heights = 1.0 / np.sqrt(np.sum(inv_lattice * inv_lattice, axis=0))
    reach = np.ceil(rmax / heights + 0.5).astype(int)
    axes = [np.arange(-r, r + 1, dtype=float) for r in reach]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    # the zero translation sits in the middle of the C-ordered grid
    zero = len(grid) // 2
    return grid @ lattice, zero


@njit(cache=True)
def _lj_kernel(cart, lattice, inv_lattice, images, zero, types, eps4, sig2, shift, rc2,
               want_forces, skip_self):
    n = cart.shape[0]
    forces = np.zeros((n, 3))
    energy = 0.0
    rmin2 = np.inf
    ratio2 = np.inf
    s = np.empty(3)
    w = np.empty(3)
    for i in range(n):
        for j in range(i, n):
            if i == j and skip_self:
                continue
            for k in range(3):
                s[k] = ((cart[j, 0] - cart[i, 0]) * inv_lattice[0, k]
                        + (cart[j, 1] - cart[i, 1]) * inv_lattice[1, k]
                        + (cart[j, 2] - cart[i, 2]) * inv_lattice[2, k])
                s[k] -= np.floor(s[k] + 0.5)
            for k in range(3):
                w[k] = s[0] * lattice[0, k] + s[1] * lattice[1, k] + s[2] * lattice[2, k]
            ti = types[i]
            tj = types[j]
            for m in range(images.shape[0]):
                if i == j and m == zero:
                    continue
                vx = w[0] + images[m, 0]
                vy = w[1] + images[m, 1]
                vz = w[2] + images[m, 2]
                r2 = vx * vx + vy * vy + vz * vz
                if r2 >= rc2:
                    continue
                if r2 < rmin2:
                    rmin2 = r2
                q = r2 / sig2[ti, tj]
                if q < ratio2:
                    ratio2 = q
                sr2 = sig2[ti, tj] / r2
                sr6 = sr2 * sr2 * sr2
                e = eps4[ti, tj] * (sr6 * sr6 - sr6) - shift[ti, tj]
                if i == j:
                    # each self-image appears as both +n and -n
                    energy += 0.5 * e
                    continue
                energy += e
                if want_forces:
                    fr = eps4[ti, tj] * (12.0 * sr6 * sr6 - 6.0 * sr6) / r2
                    forces[j, 0] += fr * vx
                    forces[j, 1] += fr * vy
                    forces[j, 2] += fr * vz
                    forces[i, 0] -= fr * vx
                    forces[i, 1] -= fr * vy
                    forces[i, 2] -= fr * vz
    return energy, forces, rmin2, ratio2


@njit(cache=True)
def _max_norm(forces):
    best = 0.0
    for i in range(forces.shape[0]):
        v = math.sqrt(forces[i, 0] ** 2 + forces[i, 1] ** 2 + forces[i, 2] ** 2)
        if v > best:
            best = v
    return best


@njit(cache=True)
def _relax_kernel(cart, lattice, inv_lattice, images, zero, types, eps4, sig2, shift, rc2,
                  skip_self, overlap2, max_steps, step0, c1, max_halvings, ftol):
    pos = cart.copy()
    energies = np.full(max_steps + 1, np.nan)
    energy, forces, rmin2, _ = _lj_kernel(pos, lattice, inv_lattice, images, zero, types,
                                          eps4, sig2, shift, rc2, True, skip_self)
    energies[0] = energy
    accepted = 0
    for _ in range(max_steps):
        fmax = _max_norm(forces)
        if fmax < ftol:
            break
        g2 = 0.0
        for i in range(pos.shape[0]):
            for k in range(3):
                g2 += forces[i, k] * forces[i, k]
        step = step0
        moved = False
        for _h in range(max_halvings + 1):
            trial = pos + step * forces
            e_t, f_t, r_t, _ = _lj_kernel(trial, lattice, inv_lattice, images, zero, types,
                                          eps4, sig2, shift, rc2, True, skip_self)
            if r_t >= overlap2 and e_t <= energy - c1 * step * g2:
                pos = trial
                energy = e_t
                forces = f_t
                moved = True
                break
            step *= 0.5
        if not moved:
            break
        accepted += 1
        energies[accepted] = energy
    return pos, energy, forces, energies[: accepted + 1]


@njit(cache=True)
def _neighbor_kernel(cart, lattice, inv_lattice, images, zero, rmax2, coord_rmax2, rc, width):
    """Per-atom nearest-neighbour distance and smooth coordination count."""
    n = cart.shape[0]
    nearest = np.full(n, np.inf)
    coord = np.zeros(n)
    s = np.empty(3)
    w = np.empty(3)
    for i in range(n):
        for j in range(i, n):
            for k in range(3):
                s[k] = ((cart[j, 0] - cart[i, 0]) * inv_lattice[0, k]
                        + (cart[j, 1] - cart[i, 1]) * inv_lattice[1, k]
                        + (cart[j, 2] - cart[i, 2]) * inv_lattice[2, k])
                s[k] -= np.floor(s[k] + 0.5)
            for k in range(3):
                w[k] = s[0] * lattice[0, k] + s[1] * lattice[1, k] + s[2] * lattice[2, k]
            for m in range(images.shape[0]):
                if i == j and m == zero:
                    continue
                vx = w[0] + images[m, 0]
                vy = w[1] + images[m, 1]
                vz = w[2] + images[m, 2]
                r2 = vx * vx + vy * vy + vz * vz
                if r2 >= rmax2:
                    continue
                r = math.sqrt(r2)
                c = 0.0
                if r2 < coord_rmax2:
                    c = 1.0 / (1.0 + math.exp((r - rc) / width))
                if r < nearest[i]:
                    nearest[i] = r
                coord[i] += c
                if i != j:
                    if r < nearest[j]:
                        nearest[j] = r
                    coord[j] += c
    return nearest, coord


# --------------------------------------------------------------------------
# evaluation


def _lj_setup(g: CrystalGenotype, params: DomainParams):
    lattice = g.lattice
    inv = np.linalg.inv(lattice)
    if params.minimum_image:
        images, zero = np.zeros((1, 3)), 0
    else:
        images, zero = _image_translations(lattice, inv, params.cutoff)
    return (
        lattice,
        inv,
        images,
        zero,
        params.type_indices(g.species),
        4.0 * params._eps,
        params._sigma**2,
        params._shift,
        params.cutoff**2,
        bool(params.minimum_image),
    )


def _lj(g: CrystalGenotype, params: DomainParams, want_forces: bool):
    lat, inv, images, zero, types, eps4, sig2, shift, rc2, skip = _lj_setup(g, params)
    energy, forces, rmin2, _ = _lj_kernel(
        g.cart, lat, inv, images, zero, types, eps4, sig2, shift, rc2, want_forces, skip
    )
    if rmin2 < params.overlap_distance**2:
        raise OverlapError(f"atoms {math.sqrt(rmin2):.3g} A apart")
    return energy, forces


def lj_energy(g: CrystalGenotype, params: DomainParams) -> float:
    return float(_lj(g, params, False)[0])


def lj_forces(g: CrystalGenotype, params: DomainParams) -> np.ndarray:
    return _lj(g, params, True)[1]


def max_force(forces: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(forces, axis=1))) if len(forces) else 0.0


def min_distance_ratio(g: CrystalGenotype, params: DomainParams) -> float:
    """Smallest pair distance divided by the pair's mixed sigma."""
    lat, inv, images, zero, types, eps4, sig2, shift, rc2, skip = _lj_setup(g, params)
    _, _, _, ratio2 = _lj_kernel(
        g.cart, lat, inv, images, zero, types, eps4, sig2, shift, rc2, False, skip
    )
    return math.sqrt(ratio2)


def _neighbors(g: CrystalGenotype, rmax: float, coord_rmax: float = 0.0, rc: float = 0.0, width: float = 1.0):
    lattice = g.lattice
    inv = np.linalg.inv(lattice)
    rmax = max(rmax, coord_rmax)
    images, zero = _image_translations(lattice, inv, rmax)
    return _neighbor_kernel(
        g.cart, lattice, inv, images, zero, rmax * rmax, coord_rmax * coord_rmax, rc, width
    )


def _self_image_reach(g: CrystalGenotype) -> float:
    # every atom has a self-image no further away than the shortest lattice vector
    return float(np.min(g.lengths)) * (1.0 + 1e-9)


def nearest_neighbor_distances(g: CrystalGenotype) -> np.ndarray:
    """Per-atom distance to the closest other site, periodic images included."""
    return _neighbors(g, _self_image_reach(g))[0]


def coordination_numbers(g: CrystalGenotype, params: DomainParams) -> np.ndarray:
    """Smooth neighbour counts, summed over all images within the LJ cutoff."""
    return _neighbors(
        g, 0.0, params.cutoff, params.coordination_cutoff, params.coordination_width
    )[1]


def _magnetism_from(coord: np.ndarray, g: CrystalGenotype, params: DomainParams) -> float:
    moments = params._moment[params.type_indices(g.species)]
    return float(abs(np.sum(moments * np.exp(-coord / 4.0))))


def magnetism(g: CrystalGenotype, params: DomainParams) -> float:
    return _magnetism_from(coordination_numbers(g, params), g, params)


@dataclass(frozen=True)
class FeatureVector:
    values: tuple
    raw: tuple
    clamped: bool


def clamp_features(raw: Sequence[float], bounds) -> FeatureVector:
    raw = tuple(float(x) for x in raw)
    if not all(math.isfinite(x) for x in raw):
        raise ValueError(f"non-finite features {raw}")
    vals = tuple(min(max(x, lo), hi) for x, (lo, hi) in zip(raw, bounds))
    return FeatureVector(vals, raw, vals != raw)


def _features_from(nearest: np.ndarray, g: CrystalGenotype, params: DomainParams) -> FeatureVector:
    return clamp_features((float(np.mean(nearest)), g.volume / g.n_atoms), params.feature_bounds)


def compute_features(g: CrystalGenotype, params: DomainParams) -> FeatureVector:
    return _features_from(nearest_neighbor_distances(g), g, params)


@dataclass
class EvaluatedSolution:
    genotype: CrystalGenotype
    objectives: tuple
    features: tuple
    force_norm: float
    energy: float = 0.0
    clamped: bool = False
    min_pair_ratio: float = math.inf
    uid: int = -1
    iteration: int = 0
    parents: tuple = ()
    operator: str = "init"


def evaluate(
    g: CrystalGenotype, params: DomainParams, force_norm: float | None = None
) -> EvaluatedSolution:
    """Score a genotype. ``force_norm`` may be supplied by a preceding relaxation."""
    lat, inv, images, zero, types, eps4, sig2, shift, rc2, skip = _lj_setup(g, params)
    energy, forces, rmin2, ratio2 = _lj_kernel(
        g.cart, lat, inv, images, zero, types, eps4, sig2, shift, rc2, force_norm is None, skip
    )
    if rmin2 < params.overlap_distance**2:
        raise OverlapError(f"atoms {math.sqrt(rmin2):.3g} A apart")
    if force_norm is None:
        force_norm = max_force(forces)
    nearest, coord = _neighbors(
        g, _self_image_reach(g), params.cutoff, params.coordination_cutoff, params.coordination_width
    )
    feats = _features_from(nearest, g, params)
    objectives = objective_vector((-energy, _magnetism_from(coord, g, params)), 2)
    return EvaluatedSolution(
        genotype=g,
        objectives=objectives,
        features=feats.values,
        force_norm=float(force_norm),
        energy=float(energy),
        clamped=feats.clamped,
        min_pair_ratio=math.sqrt(ratio2),
    )


def filter_solution(s: EvaluatedSolution, force_threshold: float, ref: Sequence[float]) -> bool:
    if not s.force_norm <= force_threshold:
        return False
    return all(o >= r for o, r in zip(s.objectives, ref))


# --------------------------------------------------------------------------
# relaxation


@dataclass
class RelaxResult:
    genotype: CrystalGenotype
    force_norm: float
    energies: np.ndarray

    def __iter__(self):
        # allows ``g, fmax = relax(...)``
        return iter((self.genotype, self.force_norm))


def relax(
    g: CrystalGenotype,
    max_steps: int,
    params: DomainParams,
    *,
    step: float = 0.05,
    c1: float = 1e-4,
    max_halvings: int = 20,
    force_tol: float = 0.01,
) -> RelaxResult:
    """Backtracking steepest descent on atom positions; the lattice is held fixed."""
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    lat, inv, images, zero, types, eps4, sig2, shift, rc2, skip = _lj_setup(g, params)
    energy0, _, rmin2, _ = _lj_kernel(
        g.cart, lat, inv, images, zero, types, eps4, sig2, shift, rc2, False, skip
    )
    overlap2 = params.overlap_distance**2
    if rmin2 < overlap2:
        raise OverlapError(f"atoms {math.sqrt(rmin2):.3g} A apart")
    pos, energy, forces, energies = _relax_kernel(
        g.cart, lat, inv, images, zero, types, eps4, sig2, shift, rc2, skip, overlap2,
        int(max_steps), float(step), float(c1), int(max_halvings), float(force_tol),
    )
    if len(energies) == 1:
        out = g.copy()
    else:
        out = CrystalGenotype(g.lengths.copy(), g.angles.copy(), wrap_fractional(pos @ inv), g.species)
    return RelaxResult(out, max_force(forces), energies)


# --------------------------------------------------------------------------
# variation


def apply_strain(g: CrystalGenotype, strain: np.ndarray, params: DomainParams) -> CrystalGenotype | None:
    """Deform the lattice by ``I + strain``; None if the result breaks the cell rules."""
    new_lattice = g.lattice @ (np.eye(3) + np.asarray(strain, dtype=float))
    if np.linalg.det(new_lattice) <= 0:
        return None
    lengths, angles = lattice_parameters(new_lattice)
    child = CrystalGenotype(lengths, angles, g.frac.copy(), g.species)
    return None if check_genotype(child, params) else child


def random_strain(sigma: float, rng: np.random.Generator) -> np.ndarray:
    eps = np.diag(rng.normal(0.0, sigma, 3)) if sigma > 0 else np.zeros((3, 3))
    if sigma > 0:
        off = rng.normal(0.0, sigma, 3) / 2.0
        for (i, j), v in zip(((0, 1), (0, 2), (1, 2)), off):
            eps[i, j] = eps[j, i] = v
    return eps


def strain_mutation(
    g: CrystalGenotype,
    sigma: float,
    rng: np.random.Generator,
    params: DomainParams,
    max_retries: int = 10,
) -> CrystalGenotype:
    if sigma < 0:
        raise ValueError("strain sigma must be non-negative")
    if sigma == 0:
        return g.copy()
    for _ in range(max_retries + 1):
        child = apply_strain(g, random_strain(sigma, rng), params)
        if child is not None:
            return child
    return g.copy()


def permutation_mutation(g: CrystalGenotype, rng: np.random.Generator) -> CrystalGenotype:
    pairs = [
        (i, j)
        for i in range(g.n_atoms)
        for j in range(i + 1, g.n_atoms)
        if g.species[i] != g.species[j]
    ]
    if not pairs:
        raise NotApplicableError("permutation needs at least two distinct species")
    i, j = pairs[int(rng.integers(len(pairs)))]
    species = list(g.species)
    species[i], species[j] = species[j], species[i]
    return CrystalGenotype(g.lengths.copy(), g.angles.copy(), g.frac.copy(), species)


# --------------------------------------------------------------------------
# initialisation templates

# fractional sites of each cubic conventional cell
TEMPLATE_SITES = {
    "sc": np.array([[0.0, 0.0, 0.0]]),
    "bcc": np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]]),
    "fcc": np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
    "diamond": np.array(
        [
            [0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0],
            [0.25, 0.25, 0.25], [0.25, 0.75, 0.75], [0.75, 0.25, 0.75], [0.75, 0.75, 0.25],
        ]
    ),
}


def _replication(m: int) -> tuple[int, int, int]:
    """Most nearly cubic (n1 <= n2 <= n3) with n1*n2*n3 == m."""
    best = None
    for n1 in range(1, m + 1):
        if m % n1:
            continue
        for n2 in range(n1, m // n1 + 1):
            if (m // n1) % n2:
                continue
            n3 = m // (n1 * n2)
            if n3 < n2:
                continue
            key = (n3 / n1, n3)
            if best is None or key < best[0]:
                best = (key, (n1, n2, n3))
    return best[1]


def template_names(n_atoms: int) -> list[str]:
    return [name for name, sites in TEMPLATE_SITES.items() if n_atoms % len(sites) == 0]


def _sublattice_parity(name: str, cart_units: np.ndarray) -> np.ndarray:
    """Two-colouring giving rocksalt (sc), CsCl (bcc) or zincblende (diamond) ordering."""
    if name == "sc":
        return np.rint(cart_units.sum(axis=1)).astype(int) % 2
    if name == "bcc":
        return (np.rint(2 * cart_units[:, 0]).astype(int) % 2)
    if name == "diamond":
        return (np.rint(4 * cart_units[:, 0]).astype(int) % 2)
    return np.zeros(len(cart_units), dtype=int)


def template_structure(
    name: str, n_atoms: int, species: Sequence[str], volume_per_atom: float,
    rng: np.random.Generator | None = None,
) -> CrystalGenotype:
    """Supercell of a cubic template holding ``n_atoms`` sites at the given density.

    ``species`` is the multiset to place. Two equal-count species use the
    template's natural sublattice ordering; other compositions are shuffled
    with ``rng`` (or kept in order when no rng is given).
    """
    basis = TEMPLATE_SITES[name]
    if n_atoms % len(basis):
        raise ValueError(f"{name} template cannot hold {n_atoms} atoms")
    reps = _replication(n_atoms // len(basis))
    cells = np.array([(i, j, k) for i in range(reps[0]) for j in range(reps[1]) for k in range(reps[2])])
    units = (cells[:, None, :] + basis[None, :, :]).reshape(-1, 3)
    frac = units / np.array(reps, dtype=float)
    a = (volume_per_atom * len(basis)) ** (1.0 / 3.0)
    lengths = a * np.array(reps, dtype=float)

    labels = sorted(species)
    counts = {s: labels.count(s) for s in set(labels)}
    names = sorted(counts)
    if len(names) == 2 and counts[names[0]] == counts[names[1]] and name != "fcc":
        parity = _sublattice_parity(name, units)
        if parity.sum() * 2 == len(parity):
            assigned = [names[p] for p in parity]
            return CrystalGenotype(lengths, [90.0, 90.0, 90.0], frac, assigned)
    assigned = list(species)
    if rng is not None and len(names) > 1:
        assigned = [assigned[i] for i in rng.permutation(len(assigned))]
    return CrystalGenotype(lengths, [90.0, 90.0, 90.0], frac, assigned)


def initialize_population(
    n: int, params: DomainParams, rng: np.random.Generator, max_attempts: int = 50
) -> list[CrystalGenotype]:
    n_atoms = params.n_atoms
    names = template_names(n_atoms)
    if not names:
        raise ValueError(f"no lattice template holds {n_atoms} atoms")
    mean_vpa = params.initial_volume / n_atoms
    out = []
    for _ in range(n):
        for _attempt in range(max_attempts):
            name = names[int(rng.integers(len(names)))]
            vpa = mean_vpa * math.exp(params.initial_volume_spread * rng.normal())
            g = template_structure(name, n_atoms, params.species_list, vpa, rng)
            g.frac = wrap_fractional(g.frac + rng.normal(0.0, params.jitter, g.frac.shape))
            if min_distance_ratio(g, params) >= params.min_distance_ratio:
                break
        out.append(g)
    return out
