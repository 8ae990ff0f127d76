"""Command line entry point: ``momex run|suite|compare|illuminate|match``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .config import load_run_config
from .engine import ALGORITHMS, RunFailure, run_suite, suite_configs
from .illumination import DEFAULT_LEVELS, illuminate
from .matcher import MatchTolerances, match_archive
from .metrics import METRIC_NAMES, compare_runs, metric_traces


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _write_table(path: Path | None, header, rows) -> None:
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    finally:
        if path:
            fh.close()


def cmd_run(args) -> int:
    cfg = load_run_config(
        args.config, seed=args.seed, total_evaluations=args.budget, algorithm=args.algorithm
    )
    cfg = replace(cfg, run_id=f"{cfg.algorithm}_seed{cfg.seed}")
    (result,) = run_suite([cfg], args.out, force=args.force)
    if isinstance(result, RunFailure):
        print(result.error, file=sys.stderr)
        return 1
    m = result.metrics[-1]
    print(f"{cfg.run_id}: evaluations={m.evaluations} moqd={m.moqd_score:.4g} "
          f"coverage={m.coverage:.3f} -> {result.path}")
    return 0


def cmd_suite(args) -> int:
    base = load_run_config(args.config, total_evaluations=args.budget)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    configs = suite_configs(base, seeds, args.algorithms)
    results = run_suite(configs, args.out, force=args.force, n_jobs=args.jobs)
    failures = [r for r in results if isinstance(r, RunFailure)]
    for f in failures:
        print(f"{f.config.run_id} failed:\n{f.error}", file=sys.stderr)
    print(f"{len(results) - len(failures)}/{len(results)} runs written to {args.out}")
    return 1 if failures else 0


def cmd_compare(args) -> int:
    records = io.load_records(args.runs)
    if not records:
        print(f"no run records under {args.runs}", file=sys.stderr)
        return 1
    rows = compare_runs(records, alpha=args.alpha, reference=args.reference)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    _write_table(
        out / "comparison.tsv" if out else None,
        ["metric", "algorithm", "median", "q25", "q75", "p_value", "p_holm", "reject"],
        [[r.metric, r.algorithm, r.median, r.q25, r.q75, r.p_value, r.p_adjusted, r.reject] for r in rows],
    )
    if out:
        for metric in METRIC_NAMES:
            trace_rows = [
                [alg, *row] for alg, recs in records.items() for row in metric_traces(recs, metric)
            ]
            _write_table(out / f"trace_{metric}.tsv", ["algorithm", "evaluations", "median", "q25", "q75"], trace_rows)
    return 0


def cmd_illuminate(args) -> int:
    record = io.load_record(args.run)
    table = illuminate(record.archive, args.levels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    centroids = record.archive.tessellation.centroids
    for level, values in zip(table.levels, table.values):
        rows = [[cell, centroids[cell][0], centroids[cell][1], values.get(cell)] for cell in range(len(centroids))]
        _write_table(out / f"illumination_{level:g}.tsv", ["cell", "centroid_0", "centroid_1", "best_magnetism"], rows)
    print(f"{len(table.levels)} tables written to {out}")
    return 0


def cmd_match(args) -> int:
    record = io.load_record(args.run)
    refs = io.read_references(args.references or io.bundled_references_path())
    tol = MatchTolerances(args.ltol, args.atol, args.stol)
    report = match_archive(record.archive, refs, record.config.domain, tol)
    _write_table(
        Path(args.out) if args.out else None,
        ["reference", "cell", "match_count", "matching_uids", "outperforms_stability", "outperforms_magnetism"],
        [[r.name, r.cell, r.count, " ".join(map(str, r.matches)), r.outperforms_stability, r.outperforms_magnetism] for r in report],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="momex", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one seeded run")
    r.add_argument("config", nargs="?", help="TOML config (defaults if omitted)")
    r.add_argument("--out", default="runs")
    r.add_argument("--seed", type=int)
    r.add_argument("--budget", type=int, help="override total_evaluations")
    r.add_argument("--algorithm", choices=ALGORITHMS)
    r.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="seeds x algorithms")
    s.add_argument("config", nargs="?")
    s.add_argument("--out", default="runs")
    s.add_argument("--seeds", type=int, default=15)
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    s.add_argument("--budget", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_suite)

    c = sub.add_parser("compare", help="median/IQR table and paired tests")
    c.add_argument("runs", help="directory holding run directories")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--reference", default="mome_x")
    c.add_argument("--out", help="directory for comparison.tsv and trace_*.tsv (stdout if omitted)")
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("illuminate", help="per-cell best magnetism under stability thresholds")
    i.add_argument("run", help="run directory")
    i.add_argument("--levels", type=float, nargs="+", default=list(DEFAULT_LEVELS))
    i.add_argument("--out", default="illumination")
    i.set_defaults(func=cmd_illuminate)

    m = sub.add_parser("match", help="match an archive against reference structures")
    m.add_argument("run", help="run directory")
    m.add_argument("--references", help="reference file (bundled FCC/HCP if omitted)")
    m.add_argument("--ltol", type=float, default=0.2)
    m.add_argument("--atol", type=float, default=5.0)
    m.add_argument("--stol", type=float, default=0.3)
    m.add_argument("--out")
    m.set_defaults(func=cmd_match)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (FileExistsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
