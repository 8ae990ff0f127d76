"""Flat-file formats for run records, archive snapshots and reference structures.

A run directory holds:

``config.json``
    the full run configuration.
``metrics.csv``
    one row per iteration: evaluations, moqd_score, energy_qd_score,
    magnetism_qd_score, coverage, global_hypervolume.
``snapshot.csv``
    the MOME archive used for metrics (the passive archive for baselines),
    one row per stored solution, columns ``SNAPSHOT_COLUMNS``.
``me_snapshot.csv``
    baselines only: the operational MAP-Elites archive, same columns.
``centroids.csv`` / ``me_centroids.csv``
    the tessellations, one centroid per row.

Floats are written with ``repr`` so every file round-trips exactly. The
``genotype`` column is a compact JSON object with keys lengths, angles,
species and frac.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .archive import CvtTessellation, MapElitesArchive, MomeArchive
from .domain import CrystalGenotype, EvaluatedSolution
from .engine import RunConfig, RunRecord
from .matcher import ReferenceStructure
from .metrics import METRIC_NAMES, MetricsRow

SNAPSHOT_COLUMNS = (
    "run_id",
    "uid",
    "iteration",
    "operator",
    "cell",
    "centroid_0",
    "centroid_1",
    "feature_0",
    "feature_1",
    "objective_0",
    "objective_1",
    "force_norm",
    "genotype",
)


def write_snapshot(path: str | Path, archive: MomeArchive | MapElitesArchive, run_id: str) -> Path:
    path = Path(path)
    centroids = archive.tessellation.centroids
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for cell, s in archive.solutions():
            w.writerow(
                [
                    run_id,
                    s.uid,
                    s.iteration,
                    s.operator,
                    cell,
                    repr(float(centroids[cell][0])),
                    repr(float(centroids[cell][1])),
                    repr(float(s.features[0])),
                    repr(float(s.features[1])),
                    repr(float(s.objectives[0])),
                    repr(float(s.objectives[1])),
                    repr(float(s.force_norm)),
                    s.genotype.to_json(),
                ]
            )
    return path


def read_snapshot_rows(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("uid", "iteration", "cell"):
            row[key] = int(row[key])
        for key in SNAPSHOT_COLUMNS[5:12]:
            row[key] = float(row[key])
    return rows


def solution_from_row(row: dict) -> EvaluatedSolution:
    return EvaluatedSolution(
        genotype=CrystalGenotype.from_json(row["genotype"]),
        objectives=(row["objective_0"], row["objective_1"]),
        features=(row["feature_0"], row["feature_1"]),
        force_norm=row["force_norm"],
        uid=row["uid"],
        iteration=row["iteration"],
        operator=row["operator"],
    )


def read_snapshot(path: str | Path, tessellation: CvtTessellation, max_front_size: int = 10) -> MomeArchive:
    """Rebuild a MOME archive from a snapshot by re-inserting its rows in order."""
    archive = MomeArchive(tessellation, max_front_size)
    for row in read_snapshot_rows(path):
        archive.insert(solution_from_row(row))
    return archive


def write_centroids(path: str | Path, tessellation: CvtTessellation) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "centroid_0", "centroid_1"])
        for i, c in enumerate(tessellation.centroids):
            w.writerow([i, repr(float(c[0])), repr(float(c[1]))])
    return path


def read_centroids(path: str | Path, bounds=None, seed: int = 0) -> CvtTessellation:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    centroids = np.array([[float(r["centroid_0"]), float(r["centroid_1"])] for r in rows])
    if bounds is None:
        bounds = tuple(zip(centroids.min(axis=0), centroids.max(axis=0)))
    return CvtTessellation(centroids, bounds, seed)


def write_metrics(path: str | Path, rows: Iterable[MetricsRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("evaluations",) + METRIC_NAMES)
        for r in rows:
            w.writerow([r.evaluations] + [repr(float(getattr(r, m))) for m in METRIC_NAMES])
    return path


def read_metrics(path: str | Path) -> list[MetricsRow]:
    with Path(path).open(newline="") as fh:
        return [
            MetricsRow(int(r["evaluations"]), *(float(r[m]) for m in METRIC_NAMES))
            for r in csv.DictReader(fh)
        ]


def write_record(record: RunRecord, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cfg = record.config
    (d / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    write_metrics(d / "metrics.csv", record.metrics)
    write_snapshot(d / "snapshot.csv", record.archive, cfg.run_id)
    write_centroids(d / "centroids.csv", record.archive.tessellation)
    if record.me_archive is not None:
        write_snapshot(d / "me_snapshot.csv", record.me_archive, cfg.run_id)
        write_centroids(d / "me_centroids.csv", record.me_archive.tessellation)
    return d


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def load_record(directory: str | Path, with_archive: bool = True) -> RunRecord:
    d = Path(directory)
    cfg = load_config(d / "config.json")
    record = RunRecord(cfg, metrics=read_metrics(d / "metrics.csv"), path=d)
    if record.metrics:
        record.evaluations = record.metrics[-1].evaluations
    if with_archive:
        tess = read_centroids(d / "centroids.csv", cfg.domain.feature_bounds, cfg.cvt_seed)
        record.archive = read_snapshot(d / "snapshot.csv", tess, cfg.front_size)
    return record


def load_records(directory: str | Path, with_archive: bool = False) -> dict[str, list[RunRecord]]:
    """All run directories below ``directory`` grouped by algorithm, ordered by seed."""
    grouped: dict[str, list[RunRecord]] = {}
    for cfg_path in sorted(Path(directory).glob("*/config.json")):
        rec = load_record(cfg_path.parent, with_archive=with_archive)
        grouped.setdefault(rec.config.algorithm, []).append(rec)
    for recs in grouped.values():
        recs.sort(key=lambda r: r.config.seed)
    return grouped


def write_references(path: str | Path, refs: Iterable[ReferenceStructure]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "genotype"])
        for ref in refs:
            w.writerow([ref.name, ref.genotype.to_json()])
    return path


def read_references(path: str | Path) -> list[ReferenceStructure]:
    with Path(path).open(newline="") as fh:
        return [
            ReferenceStructure(r["name"], CrystalGenotype.from_json(r["genotype"]))
            for r in csv.DictReader(fh)
        ]


def bundled_references_path() -> Path:
    """Reference file shipped with the package (FCC and HCP, 8 atoms, default domain)."""
    return Path(__file__).parent / "data" / "references.csv"
