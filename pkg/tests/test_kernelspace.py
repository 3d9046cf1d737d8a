"""Twin detection, quotients, exact laws, and isomorphism search on finite spaces."""

import itertools
from fractions import Fraction as F

import numpy as np
import pytest

from orbitlab import joinings as jn
from orbitlab import kernelspace as ks
from orbitlab import systems as sy
from orbitlab.arrays import BudgetError


def random_space(rng, k, n_marks=1, n_colors=1, exact=True):
    """Random kernel space; distinct random reals make it twin-free a.s."""
    if exact:
        cuts = sorted(rng.integers(1, 20, size=k - 1).tolist()) if k > 1 else []
        weights = np.diff([0] + [c + i for i, c in enumerate(cuts)] + [25 + k])
        total = int(weights.sum())
        masses = tuple(F(int(w), total) for w in weights)
    else:
        w = rng.random(k) + 0.1
        w = w / w.sum()
        masses = tuple(float(v) for v in w[:-1]) + (float(1.0 - w[:-1].sum()),)
    marks = {f"m{i}": rng.random(k).round(6) for i in range(n_marks)}
    kernels = {f"c{i}": rng.random((k, k)).round(6) for i in range(n_colors)}
    return ks.FiniteKernelSpace(masses, marks, kernels)


def plant_twin(space, atom, split=F(1, 2)):
    """Duplicate an atom, splitting its mass; the copies are twins by construction.

    Float-mode spaces need a power-of-two split so that merging recombines the
    mass without rounding; rational mode takes any split.
    """
    k = space.size
    exact = space.exact
    frac = split if exact else float(split)
    masses = list(space.masses)
    extra = masses[atom] * frac
    masses[atom] = masses[atom] - extra
    masses.append(extra)
    marks = {a: np.append(v, v[atom]) for a, v in space.marks.items()}
    kernels = {}
    for c, mat in space.kernels.items():
        grown = np.zeros((k + 1, k + 1))
        grown[:k, :k] = mat
        grown[k, :k] = mat[atom, :k]
        grown[:k, k] = mat[:k, atom]
        grown[k, k] = mat[atom, atom]
        kernels[c] = grown
    return ks.FiniteKernelSpace(tuple(masses), marks, kernels)


def fixture_suite():
    """The >= 20 small spaces (with planted-twin cases) used across the suite."""
    rng = np.random.default_rng(2024)
    spaces = []
    for k in (1, 2, 3, 4, 5, 6):
        spaces.append(random_space(rng, k))
    for k in (2, 3, 4):
        spaces.append(random_space(rng, k, n_marks=2, n_colors=2))
    for k in (3, 4, 5):
        base = random_space(rng, k)
        spaces.append(plant_twin(base, atom=int(rng.integers(0, k)), split=F(1, 3)))
    spaces.append(plant_twin(plant_twin(random_space(rng, 3), 1), 0))  # two twin pairs
    for k in (3, 4):
        spaces.append(random_space(rng, k, exact=False))
    spaces.append(plant_twin(random_space(rng, 4, exact=False), 2))
    cyc4, cyc5 = sy.cyclic_rotation(4, 1), sy.cyclic_rotation(5, 2)
    spaces.append(ks.joining_to_kernel_space(jn.graph_joining_rotation(cyc4, 1), 2))
    spaces.append(ks.joining_to_kernel_space(jn.graph_joining_rotation(cyc5, 3), 2))
    spaces.append(ks.joining_to_kernel_space(jn.diagonal_joining(cyc5), 2))
    spaces.append(ks.joining_to_kernel_space(jn.product_joining(cyc4, cyc4), 1))
    return spaces


SUITE = fixture_suite()


def test_fixture_suite_is_big_enough():
    assert len(SUITE) >= 20
    assert all(s.size <= 16 for s in SUITE)
    assert sum(1 for s in SUITE if s.size <= 6) >= 18


def test_validation_rejects_bad_spaces():
    with pytest.raises(ValueError):
        ks.FiniteKernelSpace((F(1, 2), F(1, 3)), {}, {})  # masses not summing to 1
    with pytest.raises(ValueError):
        ks.FiniteKernelSpace((F(1, 2), F(1, 2)), {"m": [0.1]}, {})
    with pytest.raises(ValueError):
        ks.FiniteKernelSpace((F(1, 2), F(1, 2)), {}, {"c": np.zeros((3, 3))})
    with pytest.raises(ValueError):
        ks.FiniteKernelSpace((F(3, 2), F(-1, 2)), {}, {})


def test_planted_twins_are_found_and_merged():
    rng = np.random.default_rng(5)
    base = random_space(rng, 4)
    grown = plant_twin(base, atom=2)
    part = ks.twin_partition(grown)
    assert part.n_blocks == 4
    assert (2, 4) in part.blocks
    q = ks.twin_quotient(grown)
    assert q.size == 4
    assert sum(q.masses, F(0)) == 1
    # block mass adds up
    merged_mass = grown.masses[2] + grown.masses[4]
    assert merged_mass in q.masses


def test_twin_free_space_has_singleton_blocks():
    rng = np.random.default_rng(6)
    s = random_space(rng, 5)
    part = ks.twin_partition(s)
    assert part.blocks == tuple((i,) for i in range(5))
    q = ks.twin_quotient(s)
    assert q.size == s.size
    assert ks.exact_array_law(q, 2) == ks.exact_array_law(s, 2)


@pytest.mark.parametrize("idx", range(len(SUITE)))
def test_quotient_preserves_exact_laws_up_to_three(idx):
    space = SUITE[idx]
    quotient = ks.twin_quotient(space)
    top = 3 if space.size <= 6 else 2
    for n in range(1, top + 1):
        assert ks.exact_array_law(space, n) == ks.exact_array_law(quotient, n)


@pytest.mark.parametrize("idx", range(len(SUITE)))
def test_quotient_idempotent(idx):
    q1 = ks.twin_quotient(SUITE[idx])
    q2 = ks.twin_quotient(q1)
    assert q2.size == q1.size


def test_tolerance_monotonicity_never_refines():
    rng = np.random.default_rng(8)
    s = random_space(rng, 6)
    sizes = [ks.twin_partition(s, tol).n_blocks for tol in (0.0, 1e-6, 1e-2, 0.5, 10.0)]
    assert sizes == sorted(sizes, reverse=True)
    assert ks.twin_partition(s, 10.0).n_blocks == 1


def test_quotient_tolerance_inconsistency_raises():
    # a chain 0 ~ 1 ~ 2 where 0 and 2 disagree beyond the tolerance
    marks = {"m": np.array([0.0, 0.5, 1.0])}
    kernels = {"c": np.zeros((3, 3))}
    s = ks.FiniteKernelSpace((F(1, 3), F(1, 3), F(1, 3)), marks, kernels)
    with pytest.raises(ks.ToleranceError):
        ks.twin_quotient(s, tol=0.5)


def test_isomorphism_finds_witness_for_relabelings():
    rng = np.random.default_rng(9)
    for k in (2, 4, 6):
        s = random_space(rng, k)
        perm = list(rng.permutation(k))
        t = s.relabel(perm)
        assert ks.exact_array_law(s, 2) == ks.exact_array_law(t, 2)
        res = ks.kernel_isomorphic(s, t)
        assert res.isomorphic
        w = res.witness
        for c, mat in s.kernels.items():
            for i in range(k):
                for j in range(k):
                    assert mat[i, j] == t.kernels[c][w[i], w[j]]
        for a, v in s.marks.items():
            for i in range(k):
                assert v[i] == t.marks[a][w[i]]
        assert all(s.exact_masses()[i] == t.exact_masses()[w[i]] for i in range(k))


def test_isomorphism_rejects_distinct_spaces():
    rng = np.random.default_rng(10)
    s = random_space(rng, 4)
    t = random_space(rng, 4)
    assert not ks.kernel_isomorphic(s, t).isomorphic
    # one kernel entry changed: not isomorphic, and the n=2 law separates them
    u = ks.FiniteKernelSpace(s.masses, dict(s.marks),
                             {c: v.copy() for c, v in s.kernels.items()})
    u.kernels["c0"][1, 2] += 0.125
    assert not ks.kernel_isomorphic(s, u).isomorphic
    assert ks.exact_array_law(s, 2) != ks.exact_array_law(u, 2)


def test_planted_twin_vs_quotient_illustrates_quotient_ambiguity():
    rng = np.random.default_rng(11)
    s = plant_twin(random_space(rng, 3), atom=1)
    q = ks.twin_quotient(s)
    # equal array laws at every small order, yet not atom-level isomorphic
    for n in (1, 2, 3):
        assert ks.exact_array_law(s, n) == ks.exact_array_law(q, n)
    assert s.size != q.size
    assert not ks.kernel_isomorphic(s, q).isomorphic


def test_law_equal_twin_free_spaces_are_isomorphic():
    # reconstruction at small scale: exact law equality at n = atom count
    # forces an isomorphism witness for twin-free spaces
    rng = np.random.default_rng(12)
    for k in (3, 4, 5, 6):
        s = random_space(rng, k)
        assert ks.twin_partition(s).n_blocks == k
        t = s.relabel(list(rng.permutation(k)))
        assert ks.exact_array_law(s, min(k, 3)) == ks.exact_array_law(t, min(k, 3))
        assert ks.kernel_isomorphic(s, t).isomorphic


def test_graph_joining_spaces_isomorphic_across_shifts():
    cyc = sy.cyclic_rotation(6, 1)
    spaces = [ks.joining_to_kernel_space(jn.graph_joining_rotation(cyc, h), 2)
              for h in range(6)]
    for other in spaces[1:]:
        assert ks.kernel_isomorphic(spaces[0], other).isomorphic
    prod_space = ks.joining_to_kernel_space(jn.product_joining(cyc, cyc), 2)
    assert prod_space.size == 36
    assert all(m == F(1, 36) for m in prod_space.masses)


def test_isomorphism_cap_and_label_mismatch():
    rng = np.random.default_rng(13)
    s = random_space(rng, 3)
    with pytest.raises(BudgetError):
        big = random_space(rng, 11)
        ks.kernel_isomorphic(big, big, cap=10)
    with pytest.raises(ValueError):
        t = ks.FiniteKernelSpace(s.masses, {"other": np.zeros(3)}, dict(s.kernels))
        ks.kernel_isomorphic(s, t)


def test_exact_array_law_cap_and_subsets():
    rng = np.random.default_rng(14)
    s = random_space(rng, 4, n_marks=2, n_colors=2)
    with pytest.raises(BudgetError):
        ks.exact_array_law(s, 12, cap=1000)
    full = ks.exact_array_law(s, 1)
    only_m0 = ks.exact_array_law(s, 1, marks=["m0"], colors=[])
    assert len(only_m0) <= len(full)
    assert sum(only_m0.values(), F(0)) == 1


def test_file_round_trip_and_schema_errors(tmp_path):
    rng = np.random.default_rng(15)
    s = plant_twin(random_space(rng, 3), 0)
    path = tmp_path / "space.json"
    ks.save_space(s, path)
    back = ks.load_space(path)
    assert back.exact
    assert ks.exact_array_law(back, 2) == ks.exact_array_law(s, 2)
    bad = tmp_path / "bad.json"
    bad.write_text('{"masses": ["1/2", "1/2"], "marks": {}}')
    with pytest.raises(ValueError):
        ks.load_space(bad)
    bad.write_text('{"masses": [true, false], "marks": {}, "kernels": {}}')
    with pytest.raises(ValueError):
        ks.load_space(bad)
