import numpy as np
import pytest

from momex.archive import CvtTessellation, MomeArchive
from momex.domain import DomainParams, evaluate, lj_energy, template_names, template_structure, wrap_fractional
from momex.matcher import (
    MatchTolerances,
    ReferenceStructure,
    default_references,
    hcp_structure,
    match_archive,
    mean_nn_distance,
    structures_match,
)

TOL = MatchTolerances()


def random_templates(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        binary = k % 2 == 1
        species = ["A"] * 4 + ["B"] * 4 if binary else ["A"] * 8
        name = template_names(8)[int(rng.integers(4))]
        g = template_structure(name, 8, species, float(rng.uniform(10, 30)), rng)
        g.frac = wrap_fractional(g.frac + rng.normal(0, 0.01, g.frac.shape))
        out.append(g)
    return out


TEMPLATES = random_templates(50, seed=0)


def unit_vector(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("g", TEMPLATES)
def test_reflexive(g):
    assert structures_match(g, g, TOL)


@pytest.mark.parametrize("k", range(50))
def test_translation_invariant(k):
    g = TEMPLATES[k]
    shifted = g.copy()
    shifted.frac = wrap_fractional(g.frac + np.random.default_rng(k).uniform(size=3))
    assert structures_match(g, shifted, TOL)
    assert structures_match(shifted, g, TOL)


@pytest.mark.parametrize("k", range(50))
def test_rejects_displacement_three_times_tolerance(k):
    g = TEMPLATES[k]
    rng = np.random.default_rng(100 + k)
    moved = g.copy()
    step = 3 * TOL.stol * mean_nn_distance(g) * unit_vector(rng)
    i = int(rng.integers(g.n_atoms))
    moved.frac[i] = wrap_fractional((g.cart[i] + step) @ np.linalg.inv(g.lattice))
    assert not structures_match(g, moved, TOL)


def test_small_displacement_still_matches():
    g = TEMPLATES[0]
    moved = g.copy()
    moved.frac[3] = wrap_fractional((g.cart[3] + 0.3 * TOL.stol * mean_nn_distance(g) * np.array([1.0, 0, 0])) @ np.linalg.inv(g.lattice))
    assert structures_match(g, moved, TOL)


def test_axis_relabelling_matches():
    g = template_structure("sc", 8, ["A"] * 8, 20.0)
    g.lengths = g.lengths * np.array([1.0, 1.05, 0.95])
    swapped = g.copy()
    swapped.lengths = g.lengths[[2, 0, 1]]
    swapped.frac = g.frac[:, [2, 0, 1]]
    assert structures_match(g, swapped, TOL)


def test_lattice_and_composition_mismatch_rejected():
    g = template_structure("fcc", 8, ["A"] * 8, 20.0)
    assert not structures_match(g, template_structure("fcc", 8, ["A"] * 8, 40.0), TOL)
    assert not structures_match(g, template_structure("fcc", 8, ["A"] * 4 + ["B"] * 4, 20.0), TOL)
    sheared = g.copy()
    sheared.angles = np.array([90.0, 90.0, 80.0])
    assert not structures_match(g, sheared, TOL)


def test_fcc_and_hcp_are_distinct():
    fcc = template_structure("fcc", 8, ["A"] * 8, 20.0)
    hcp = hcp_structure(8, ["A"] * 8, 20.0)
    assert not structures_match(fcc, hcp, TOL)
    assert mean_nn_distance(hcp) == pytest.approx(mean_nn_distance(fcc), rel=1e-9)


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        MatchTolerances(stol=0.0)


def test_default_references_sit_at_energy_minimum():
    p = DomainParams()
    for ref in default_references(p):
        e0 = lj_energy(ref.genotype, p)
        for scale in (0.99, 1.01):
            g = ref.genotype.copy()
            g.lengths = g.lengths * scale
            assert lj_energy(g, p) > e0


def test_bundled_references_agree_with_builders():
    from momex import io

    p = DomainParams()
    bundled = {r.name: r for r in io.read_references(io.bundled_references_path())}
    for ref in default_references(p):
        assert structures_match(bundled[ref.name].genotype, ref.genotype, TOL)
        assert evaluate(ref.genotype, p).objectives == pytest.approx(evaluate(bundled[ref.name].genotype, p).objectives, rel=1e-6)


def test_match_archive_finds_reference_in_its_cell():
    p = DomainParams()
    ref = default_references(p)[0]
    tess = CvtTessellation(np.array([[2.5, 10.0], [3.0, 20.0], [4.0, 35.0]]), p.feature_bounds)
    arch = MomeArchive(tess)
    s = evaluate(ref.genotype.copy(), p)
    s.uid = 7
    arch.insert(s)
    (entry,) = match_archive(arch, [ReferenceStructure("fcc", ref.genotype, (s.objectives[0] + 1, 0.0))], p, TOL)
    assert entry.matches == [7] and entry.count == 1
    assert entry.cell == tess.assign(s.features)
    assert not entry.outperforms_stability and entry.outperforms_magnetism


@pytest.mark.parametrize("k", range(0, 50, 5))
def test_symmetric_and_permutation_invariant(k):
    g = TEMPLATES[k]
    other = TEMPLATES[(k + 1) % 50]
    assert structures_match(g, other, TOL) == structures_match(other, g, TOL)
    order = np.random.default_rng(k).permutation(g.n_atoms)
    shuffled = g.copy()
    shuffled.frac = g.frac[order]
    shuffled.species = [g.species[i] for i in order]
    assert structures_match(g, shuffled, TOL)


def test_fixed_translation_example():
    g = TEMPLATES[3]
    moved = g.copy()
    moved.frac = wrap_fractional(g.frac + np.array([0.3, 0.1, 0.7]))
    assert structures_match(g, moved, TOL)


def test_matching_is_monotone_in_tolerances():
    rng = np.random.default_rng(0)
    loose = [MatchTolerances(0.2, 5.0, s) for s in (0.05, 0.1, 0.3, 0.6)]
    for g in TEMPLATES[:20]:
        other = g.copy()
        other.frac = wrap_fractional(g.frac + rng.normal(0, 0.03, g.frac.shape))
        results = [structures_match(g, other, t) for t in loose]
        assert results == sorted(results)


def test_match_archive_examples():
    p = DomainParams()
    (fcc, _) = default_references(p)
    s = evaluate(fcc.genotype.copy(), p)
    tess = CvtTessellation(np.array([list(s.features), [4.4, 39.0]]), p.feature_bounds)

    empty = match_archive(MomeArchive(tess), [fcc], p, TOL)
    assert [e.count for e in empty] == [0]

    arch = MomeArchive(tess)
    arch.insert(s)
    (exact,) = match_archive(arch, [fcc], p, TOL)
    assert exact.count == 1 and not exact.outperforms_stability and not exact.outperforms_magnetism

    better = evaluate(fcc.genotype.copy(), p)
    better.objectives = (s.objectives[0] + 0.1, s.objectives[1] - 0.1)
    arch2 = MomeArchive(tess)
    arch2.insert(better)
    (entry,) = match_archive(arch2, [fcc], p, TOL)
    assert entry.outperforms_stability and not entry.outperforms_magnetism
