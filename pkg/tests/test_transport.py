"""Transport estimators: exactness, metric properties, and dual-bound soundness."""

import itertools
import math

import numpy as np
import pytest

from orbitlab import arrays as ar
from orbitlab import joinings as jn
from orbitlab import systems as sy
from orbitlab import transport as tp


def brute_force_wp(a, b, p=1.0):
    """Minimum over all permutations; the oracle for small assignment instances."""
    n = a.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = np.mean(np.linalg.norm(a - b[list(perm)], axis=1) ** p)
        best = min(best, cost)
    return best ** (1.0 / p)


def test_w1_1d_frozen_examples():
    assert tp.w1_1d(np.array([1.0, 2.0, 3.0]), np.array([3.0, 1.0, 2.0])).value == 0.0
    assert tp.w1_1d(np.array([0.0, 0.0]), np.array([1.0, 1.0])).value == 1.0
    # two-atom instance: both couplings of {0,1} -> {1/2,1/2} cost 1/2
    assert tp.w1_1d(np.array([0.0, 1.0]), np.array([0.5, 0.5])).value == 0.5
    with pytest.raises(ValueError):
        tp.w1_1d(np.zeros(3), np.zeros(4))


def test_assignment_matches_quantile_coupling_in_1d():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.random(40), rng.random(40)
        assert abs(tp.wp_assignment(a, b, p=1).value - tp.w1_1d(a, b).value) <= 1e-12


def test_assignment_planar_three_point_oracle():
    rng = np.random.default_rng(2)
    for _ in range(25):
        a, b = rng.random((3, 2)), rng.random((3, 2))
        for p in (1.0, 2.0):
            assert tp.wp_assignment(a, b, p=p).value == pytest.approx(
                brute_force_wp(a, b, p), abs=1e-12)


def test_assignment_exactness_up_to_eight_points():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        a, b = rng.random((n, d)), rng.random((n, d))
        assert tp.wp_assignment(a, b, p=1).value == pytest.approx(
            brute_force_wp(a, b, 1.0), abs=1e-12)


def test_assignment_zero_on_permuted_input_and_errors():
    rng = np.random.default_rng(4)
    pts = rng.random((16, 3))
    assert tp.wp_assignment(pts, pts[rng.permutation(16)]).value == 0.0
    with pytest.raises(ValueError):
        tp.wp_assignment(pts, rng.random((15, 3)))
    with pytest.raises(ValueError):
        tp.wp_assignment(pts, rng.random((16, 2)))
    with pytest.raises(ValueError):
        tp.wp_assignment(pts, pts, cap=8)
    with pytest.raises(ValueError):
        tp.wp_assignment(pts, pts, p=0.5)


def test_wp_monotone_in_p_and_triangle_inequality():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b, c = (rng.random((24, 2)) for _ in range(3))
        w1 = tp.wp_assignment(a, b, p=1).value
        w2 = tp.wp_assignment(a, b, p=2).value
        assert w2 >= w1 - 1e-12
        ab = tp.wp_assignment(a, b, p=1).value
        bc = tp.wp_assignment(b, c, p=1).value
        ac = tp.wp_assignment(a, c, p=1).value
        assert ac <= ab + bc + 1e-9


def test_kr_gap_basic_contracts():
    rng = np.random.default_rng(6)
    a, b = rng.random((4000, 1)), rng.random((4000, 1))
    g = tp.kr_gap(a, b)
    assert g.value <= 4.0 * g.standard_error  # identical laws
    obs = ar.ComposedCertificate(ar.squared_gap(0.75), ar.pair_00())
    assert obs.lipschitz <= 1.0
    wide = ar.ComposedCertificate(ar.raw_squared_gap(), ar.pair_00())
    with pytest.raises(ValueError):
        tp.kr_gap(a, b, wide)
    # vector-valued inputs are rejected: certificates are scalar statistics
    with pytest.raises(ValueError):
        tp.kr_gap(rng.random((10, 2)), rng.random((10, 2)))


def test_kr_gap_normalization_rescales():
    rng = np.random.default_rng(7)
    a, b = rng.random((500, 1)), rng.random((500, 1)) + 0.5

    class Doubled(ar.Observable):
        name, dim, lipschitz, needs = "doubled", 1, 2.0, frozenset()

        def evaluate(self, slices):  # pragma: no cover - not used
            raise NotImplementedError

    g = tp.kr_gap(a, b, Doubled(), normalize=True)
    plain = tp.kr_gap(a, b)
    assert g.value == pytest.approx(plain.value / 2.0, rel=1e-12)
    assert g.lipschitz_chain == 2.0


def test_kr_lower_bound_never_exceeds_assignment_w1():
    bern = sy.bernoulli_shift(8)
    spec = ar.ArraySpec(2, 2, 1)
    law_a = ar.empirical_law(jn.diagonal_joining(bern), spec, 512, seed=61)
    law_b = ar.empirical_law(jn.product_joining(bern, bern), spec, 512, seed=62)
    w1 = tp.wp_assignment(law_a.samples, law_b.samples, p=1)
    for obs in (ar.ComposedCertificate(ar.squared_gap(0.75), ar.pair_00()),
                ar.ComposedCertificate(ar.abs_gap(), ar.pair_00()),
                ar.ComposedCertificate(ar.abs_gap(), ar.anchored_pair())):
        g = tp.kr_gap(law_a, law_b, obs)
        combined = 4.0 * math.hypot(g.standard_error, w1.standard_error)
        assert g.value <= w1.value + combined


def test_certificate_search_returns_maximum():
    bern = sy.bernoulli_shift(8)
    spec = ar.ArraySpec(2, 1, 1)
    law_a = ar.empirical_law(jn.diagonal_joining(bern), spec, 2000, seed=63)
    law_b = ar.empirical_law(jn.product_joining(bern, bern), spec, 2000, seed=64)
    catalogue = [
        ar.ComposedCertificate(ar.squared_gap(0.75), ar.pair_00()),
        ar.ComposedCertificate(ar.abs_gap(), ar.pair_00()),
        ar.ComposedCertificate(ar.abs_gap(), ar.anchored_pair()),
    ]
    best = tp.certificate_search(law_a, law_b, catalogue)
    per = best.detail["per_observable"]
    assert len(per) == 3
    assert best.value == max(v["value"] for v in per.values())
    with pytest.raises(ValueError):
        tp.certificate_search(law_a, law_b, [])


def test_dep_lower_bound_family_maximum_and_product_null():
    bern = sy.bernoulli_shift(6)
    spec = ar.ArraySpec(2, 1, 0)
    family = [jn.diagonal_joining(bern), jn.product_joining(bern, bern)]
    dep = tp.dep_lower_bound(bern, bern, family, spec, p=1, N=512, seed=9)
    assert dep.value == max(g.value for g in dep.per_joining)
    assert dep.per_joining[0].value > dep.per_joining[1].value
    # two independent product laws: plug-in W1 is small and shrinks with N
    small = tp.dep_lower_bound(bern, bern, [jn.product_joining(bern, bern)],
                               spec, p=1, N=128, seed=10)
    big = tp.dep_lower_bound(bern, bern, [jn.product_joining(bern, bern)],
                             spec, p=1, N=1024, seed=10)
    assert big.value < small.value
    assert big.value < 0.1
    with pytest.raises(ValueError):
        tp.dep_lower_bound(bern, bern, [], spec, N=16, seed=1)
    blob = dep.as_dict()
    assert blob["is_lower_bound"] and len(blob["per_joining"]) == 2
