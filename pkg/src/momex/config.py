"""TOML run configuration.

Top-level keys mirror :class:`momex.engine.RunConfig`; the ``[domain]`` table
mirrors :class:`momex.domain.DomainParams` with one ``[domain.species.<name>]``
table per species. Anything left out takes its default::

    algorithm = "mome_x"        # mome_x | me_stability | me_magnetism | me_sum
    seed = 0
    total_evaluations = 5000
    batch_size = 100
    cells = 200                 # MOME cells
    front_size = 10             # max Pareto front length per cell
    # baseline_cells = 2000     # defaults to cells * front_size
    strain_sigma = 0.1
    permutation_probability = 0.5
    relax_steps = 100
    force_threshold = 1.0       # eV/A
    reference_point = [0.0, 0.0]
    charge_relaxation = false   # count relaxation steps against the budget

    [domain]
    composition = { A = 8 }
    cutoff = 6.5
    initial_volume = 150.0      # A^3 for the whole cell
    feature_bounds = [[2.0, 4.5], [8.0, 40.0]]

    [domain.species.A]
    sigma = 2.6
    epsilon = 1.0
    moment = 1.0
"""

from __future__ import annotations

import sys
from pathlib import Path

from .domain import DomainParams
from .engine import RunConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def config_from_mapping(data: dict) -> RunConfig:
    data = dict(data)
    domain = data.pop("domain", None)
    if domain is not None:
        data["domain"] = DomainParams(**domain)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)


def load_run_config(path: str | Path | None = None, **overrides) -> RunConfig:
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(data)
