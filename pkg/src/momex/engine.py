"""Seeded MOME-X and MAP-Elites loops over the toy crystal domain."""

from __future__ import annotations

import functools
import logging
import shutil
import traceback
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .archive import CvtTessellation, MapElitesArchive, MomeArchive, build_cvt, passive_sync
from .domain import (
    CrystalGenotype,
    DomainParams,
    EvaluatedSolution,
    OverlapError,
    evaluate,
    filter_solution,
    initialize_population,
    permutation_mutation,
    relax,
    strain_mutation,
)
from .metrics import MetricsRow, compute_metrics
from .pareto import crowding_distances

log = logging.getLogger(__name__)

ALGORITHMS = ("mome_x", "me_stability", "me_magnetism", "me_sum")
BASELINE_RULES = {"me_stability": "stability", "me_magnetism": "magnetism", "me_sum": "sum"}


@dataclass
class RunConfig:
    algorithm: str = "mome_x"
    seed: int = 0
    total_evaluations: int = 5000
    batch_size: int = 100
    cells: int = 200
    front_size: int = 10
    baseline_cells: int | None = None
    strain_sigma: float = 0.1
    permutation_probability: float = 0.5
    relax_steps: int = 100
    force_threshold: float = 1.0
    reference_point: tuple = (0.0, 0.0)
    cvt_samples: int = 50_000
    cvt_seed: int = 0
    charge_relaxation: bool = False
    run_id: str | None = None
    domain: DomainParams = field(default_factory=DomainParams)

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.total_evaluations >= self.batch_size >= 1:
            raise ValueError("need total_evaluations >= batch_size >= 1")
        if self.cells < 1 or self.front_size < 1:
            raise ValueError("cells and front_size must be positive")
        if not 0.0 <= self.permutation_probability <= 1.0:
            raise ValueError("permutation_probability must lie in [0, 1]")
        self.reference_point = tuple(float(x) for x in self.reference_point)
        if isinstance(self.domain, dict):
            self.domain = DomainParams(**self.domain)
        if self.run_id is None:
            self.run_id = f"{self.algorithm}_seed{self.seed}"

    @property
    def is_baseline(self) -> bool:
        return self.algorithm in BASELINE_RULES

    @property
    def n_baseline_cells(self) -> int:
        return self.baseline_cells or self.cells * self.front_size

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "domain"}
        out["reference_point"] = list(self.reference_point)
        out["domain"] = self.domain.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "domain" in d and isinstance(d["domain"], dict):
            d["domain"] = DomainParams(**d["domain"])
        return cls(**d)


@dataclass
class RunRecord:
    config: RunConfig
    metrics: list = field(default_factory=list)
    archive: MomeArchive | None = None
    me_archive: MapElitesArchive | None = None
    evaluations: int = 0
    path: Path | None = None


@dataclass
class RunFailure:
    config: RunConfig
    error: str


@dataclass
class EngineState:
    config: RunConfig
    iteration: int
    evaluations: int
    archive: MomeArchive
    me_archive: MapElitesArchive | None
    offspring: list


# --------------------------------------------------------------------------
# tessellation


@functools.lru_cache(maxsize=16)
def shared_tessellation(c: int, bounds: tuple, n_samples: int, seed: int) -> CvtTessellation:
    """CVT shared by every run with the same settings (computed once per process)."""
    return build_cvt(c, bounds, n_samples, seed)


# --------------------------------------------------------------------------
# selection


def _crowding_weights(front) -> np.ndarray:
    dist = np.array(crowding_distances(front.objectives))
    finite = dist[np.isfinite(dist)]
    if len(finite) == 0:
        return np.ones(len(dist))
    weights = np.where(np.isfinite(dist), dist, 2.0 * finite.max())
    if weights.sum() <= 0:
        return np.ones(len(dist))
    return weights


def _pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(weights) - 1)


def select_batch(archive, batch_size: int, rng: np.random.Generator) -> list[EvaluatedSolution]:
    """Uniform cell choice, then crowding-weighted choice within a MOME front."""
    if isinstance(archive, MapElitesArchive):
        cells = sorted(archive.cells)
        if not cells:
            raise ValueError("cannot select from an empty archive")
        return [archive.cells[cells[int(rng.integers(len(cells)))]] for _ in range(batch_size)]
    cells = archive.non_empty_cells()
    if not cells:
        raise ValueError("cannot select from an empty archive")
    weights: dict[int, np.ndarray] = {}
    out = []
    for _ in range(batch_size):
        cell = cells[int(rng.integers(len(cells)))]
        front = archive.cells[cell]
        if cell not in weights:
            weights[cell] = _crowding_weights(front)
        out.append(front.solutions[_pick(weights[cell], rng)])
    return out


# --------------------------------------------------------------------------
# the loop


class _Engine:
    def __init__(self, config: RunConfig):
        self.config = config
        self.params = config.domain
        self.rng = np.random.default_rng(config.seed)
        bounds = self.params.feature_bounds
        tess = shared_tessellation(config.cells, bounds, config.cvt_samples, config.cvt_seed)
        self.archive = MomeArchive(tess, config.front_size)
        self.me_archive = None
        if config.is_baseline:
            me_tess = shared_tessellation(
                config.n_baseline_cells, bounds, max(config.cvt_samples, 10 * config.n_baseline_cells),
                config.cvt_seed,
            )
            self.me_archive = MapElitesArchive(me_tess, BASELINE_RULES[config.algorithm])
        self.evaluations = 0
        self.next_uid = 0

    def develop(self, g: CrystalGenotype, iteration: int, parents: tuple, operator: str):
        """Relax and score one offspring; returns (solution or None, budget cost)."""
        cfg = self.config
        try:
            result = relax(g, cfg.relax_steps, self.params)
        except OverlapError:
            return None, 1
        cost = 1 + (len(result.energies) - 1 if cfg.charge_relaxation else 0)
        g_relaxed = result.genotype
        try:
            s = evaluate(g_relaxed, self.params, force_norm=result.force_norm)
        except (OverlapError, ValueError):
            return None, cost
        if s.min_pair_ratio < self.params.min_distance_ratio:
            return None, cost
        s.uid = self.next_uid
        self.next_uid += 1
        s.iteration, s.parents, s.operator = iteration, parents, operator
        if not filter_solution(s, cfg.force_threshold, cfg.reference_point):
            return None, cost
        return s, cost

    def mutate(self, parent: EvaluatedSolution) -> tuple[CrystalGenotype, str]:
        cfg = self.config
        if self.params.multi_species and self.rng.random() < cfg.permutation_probability:
            return permutation_mutation(parent.genotype, self.rng), "permutation"
        return strain_mutation(parent.genotype, cfg.strain_sigma, self.rng, self.params), "strain"

    def insert_all(self, solutions: Sequence[EvaluatedSolution]) -> None:
        target = self.me_archive if self.me_archive is not None else self.archive
        for s in solutions:
            target.insert(s)
        if self.me_archive is not None:
            passive_sync(self.archive, self.me_archive)

    def metrics(self) -> MetricsRow:
        return compute_metrics(self.archive, self.config.reference_point, self.evaluations)

    def run(self, callback: Callable[[EngineState], None] | None = None) -> RunRecord:
        cfg = self.config
        record = RunRecord(cfg)
        iteration = 0

        population = initialize_population(cfg.batch_size, self.params, self.rng)
        kept = []
        for g in population:
            s, cost = self.develop(g, iteration, (), "init")
            self.evaluations += cost
            if s is not None:
                kept.append(s)
        self.insert_all(kept)
        record.metrics.append(self.metrics())
        if callback:
            callback(EngineState(cfg, iteration, self.evaluations, self.archive, self.me_archive, kept))

        while self.evaluations < cfg.total_evaluations:
            iteration += 1
            source = self.me_archive if self.me_archive is not None else self.archive
            remaining = cfg.total_evaluations - self.evaluations
            if (self.me_archive is not None and not len(self.me_archive)) or not len(self.archive):
                # nothing survived so far: reseed rather than select
                parents = [None] * min(cfg.batch_size, remaining)
            else:
                parents = select_batch(source, min(cfg.batch_size, remaining), self.rng)
            kept = []
            for parent in parents:
                if self.evaluations >= cfg.total_evaluations:
                    break
                if parent is None:
                    child, op, pids = initialize_population(1, self.params, self.rng)[0], "init", ()
                else:
                    child, op = self.mutate(parent)
                    pids = (parent.uid,)
                s, cost = self.develop(child, iteration, pids, op)
                self.evaluations += cost
                if s is not None:
                    kept.append(s)
            self.insert_all(kept)
            record.metrics.append(self.metrics())
            if callback:
                callback(EngineState(cfg, iteration, self.evaluations, self.archive, self.me_archive, kept))
            log.debug("%s it=%d evals=%d %s", cfg.run_id, iteration, self.evaluations, record.metrics[-1])

        record.archive = self.archive
        record.me_archive = self.me_archive
        record.evaluations = self.evaluations
        return record


def run(config: RunConfig, callback: Callable[[EngineState], None] | None = None) -> RunRecord:
    return _Engine(config).run(callback)


def suite_configs(base: RunConfig, seeds: Sequence[int], algorithms: Sequence[str] = ALGORITHMS) -> list[RunConfig]:
    return [
        replace(base, algorithm=alg, seed=seed, run_id=f"{alg}_seed{seed}")
        for alg in algorithms
        for seed in seeds
    ]


def _run_and_save(config: RunConfig, out_dir: Path | None):
    from .io import write_record

    try:
        record = run(config)
    except Exception:  # noqa: BLE001 - one failed run must not sink the suite
        log.exception("run %s failed", config.run_id)
        return RunFailure(config, traceback.format_exc())
    if out_dir is not None:
        record.path = write_record(record, out_dir / config.run_id)
    return record


def run_suite(
    configs: Sequence[RunConfig],
    out_dir: str | Path | None = None,
    force: bool = False,
    n_jobs: int = 1,
) -> list:
    """Run every config independently; returns RunRecord or RunFailure per config."""
    if not configs:
        raise ValueError("empty suite")
    ids = [c.run_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("run ids must be unique")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        clashes = [i for i in ids if (out / i).exists()]
        if clashes and not force:
            raise FileExistsError(f"{len(clashes)} run directories already exist in {out}; use force")
        for i in clashes:
            shutil.rmtree(out / i)
        out.mkdir(parents=True, exist_ok=True)
    if n_jobs == 1:
        return [_run_and_save(c, out) for c in configs]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(_run_and_save)(c, out) for c in configs)
