import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from momex.domain import DomainParams, SpeciesParams  # noqa: E402

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_params():
    """Reduced LJ units: sigma = epsilon = 1, cutoff 2.5."""
    return DomainParams(
        species={"A": SpeciesParams(1.0, 1.0, 1.0)},
        composition={"A": 8},
        cutoff=2.5,
        coordination_cutoff=1.3,
        feature_bounds=((0.5, 3.0), (0.5, 10.0)),
        initial_volume=8.0,
    )


@pytest.fixture
def binary_params():
    return DomainParams(
        species={"A": SpeciesParams(2.6, 1.0, 1.0), "B": SpeciesParams(2.2, 0.6, 0.0)},
        composition={"A": 4, "B": 4},
    )


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def check(number: int, title: str, ok: bool, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
