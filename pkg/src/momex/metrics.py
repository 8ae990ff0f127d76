"""Archive metrics and paired statistical comparison of runs."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .archive import MomeArchive
from .pareto import hypervolume2d, non_dominated_2d

METRIC_NAMES = (
    "moqd_score",
    "energy_qd_score",
    "magnetism_qd_score",
    "coverage",
    "global_hypervolume",
)


@dataclass
class MetricsRow:
    evaluations: int
    moqd_score: float
    energy_qd_score: float
    magnetism_qd_score: float
    coverage: float
    global_hypervolume: float

    def as_dict(self) -> dict:
        return asdict(self)


def moqd_score(archive: MomeArchive, ref: Sequence[float]) -> float:
    return float(sum(front.hypervolume(ref) for _, front in archive.fronts()))


def objective_qd_score(archive: MomeArchive, index: int, per_cell_best: bool = False) -> float:
    """Sum of one objective over every stored solution.

    With ``per_cell_best`` only the best value in each cell is counted, which
    is the usual one-elite-per-cell QD-score.
    """
    if per_cell_best:
        return float(
            sum(max(s.objectives[index] for s in front) for _, front in archive.fronts())
        )
    return float(sum(s.objectives[index] for _, s in archive.solutions()))


def coverage(archive: MomeArchive) -> float:
    return len(archive.non_empty_cells()) / archive.n_cells


def global_hypervolume(archive: MomeArchive, ref: Sequence[float]) -> float:
    pool = [tuple(s.objectives) for _, s in archive.solutions()]
    if not pool:
        return 0.0
    return hypervolume2d([pool[i] for i in non_dominated_2d(pool)], ref)


def compute_metrics(archive: MomeArchive, ref: Sequence[float], evaluations: int) -> MetricsRow:
    return MetricsRow(
        evaluations=int(evaluations),
        moqd_score=moqd_score(archive, ref),
        energy_qd_score=objective_qd_score(archive, 0),
        magnetism_qd_score=objective_qd_score(archive, 1),
        coverage=coverage(archive),
        global_hypervolume=global_hypervolume(archive, ref),
    )


# --------------------------------------------------------------------------
# statistics


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign patterns reaching each doubled positive-rank sum."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks.astype(int):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_signed_rank(
    x: Sequence[float], y: Sequence[float], exact_max_n: int = 20, min_n: int = 5
) -> float:
    """Two-sided p-value of the paired signed-rank test.

    Zero differences are dropped and tied magnitudes share average ranks.
    Up to ``exact_max_n`` pairs the null distribution is enumerated exactly
    over all sign assignments; beyond that a tie-corrected normal
    approximation with continuity correction is used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("samples must be paired")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    if n < min_n:
        raise ValueError(f"need at least {min_n} non-zero differences, got {n}")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_null_counts(doubled)
        k = int(round(2 * w_plus))
        total = float(counts.sum())
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        return float(min(1.0, 2.0 * min(lower, upper)))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(max(z, 0.0))))


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> list[tuple[float, bool]]:
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    if m == 0:
        return []
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    reject = np.zeros(m, dtype=bool)
    running = 0.0
    still_rejecting = True
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[idx]))
        adjusted[idx] = running
        still_rejecting = still_rejecting and p[idx] <= alpha / (m - rank)
        reject[idx] = still_rejecting
    return [(float(a), bool(r)) for a, r in zip(adjusted, reject)]


@dataclass
class ComparisonRow:
    metric: str
    algorithm: str
    median: float
    q25: float
    q75: float
    p_value: float | None = None
    p_adjusted: float | None = None
    reject: bool | None = None


def _final_value(record, metric: str) -> float:
    return float(getattr(record.metrics[-1], metric))


def compare_runs(
    records: Mapping[str, Sequence],
    metrics: Sequence[str] = METRIC_NAMES,
    alpha: float = 0.05,
    reference: str = "mome_x",
) -> list[ComparisonRow]:
    """Median / IQR of final metrics per algorithm, plus paired tests.

    Each non-reference algorithm is tested against ``reference`` with the
    signed-rank test, pairing runs by seed; Holm's correction is applied
    across the comparisons of one metric. Pairs with fewer than five
    non-zero differences are left untested (p fields None).
    """
    seeds = {alg: [r.config.seed for r in recs] for alg, recs in records.items()}
    seed_sets = {alg: sorted(s) for alg, s in seeds.items()}
    first = next(iter(seed_sets.values()))
    for alg, s in seed_sets.items():
        if s != first or len(set(s)) != len(s):
            raise ValueError(f"runs of {alg!r} are not paired by seed with the others")
    by_seed = {
        alg: {r.config.seed: r for r in recs} for alg, recs in records.items()
    }
    rows = []
    for metric in metrics:
        values = {
            alg: np.array([_final_value(by_seed[alg][s], metric) for s in first])
            for alg in records
        }
        metric_rows = {}
        for alg, v in values.items():
            q25, med, q75 = np.percentile(v, [25, 50, 75])
            metric_rows[alg] = ComparisonRow(metric, alg, float(med), float(q25), float(q75))
        rivals = [alg for alg in records if alg != reference]
        if reference in values and rivals:
            tested, raw = [], []
            for alg in rivals:
                try:
                    raw.append(wilcoxon_signed_rank(values[reference], values[alg]))
                except ValueError:
                    # too few non-zero differences: reported without a test
                    continue
                tested.append(alg)
            for alg, p, (adj, rej) in zip(tested, raw, holm_bonferroni(raw, alpha)):
                row = metric_rows[alg]
                row.p_value, row.p_adjusted, row.reject = p, adj, rej
        rows.extend(metric_rows.values())
    return rows


def metric_traces(records: Sequence, metric: str) -> list[tuple[int, float, float, float]]:
    """Per-evaluation-count (evaluations, median, q25, q75) across runs."""
    table: dict[int, list[float]] = {}
    for rec in records:
        for row in rec.metrics:
            table.setdefault(row.evaluations, []).append(getattr(row, metric))
    out = []
    for evals in sorted(table):
        q25, med, q75 = np.percentile(table[evals], [25, 50, 75])
        out.append((evals, float(med), float(q25), float(q75)))
    return out
