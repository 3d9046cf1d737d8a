"""Array sampling, empirical laws, observables, and their Lipschitz contracts."""

import math

import numpy as np
import pytest

from orbitlab import analytics as an
from orbitlab import arrays as ar
from orbitlab import joinings as jn
from orbitlab import systems as sy
from orbitlab import transport as tp
from orbitlab.rng import block_stream


@pytest.fixture(scope="module")
def bern():
    return sy.bernoulli_shift(8)


def test_spec_validation():
    with pytest.raises(ValueError):
        ar.ArraySpec(0, 1, 0)
    with pytest.raises(ValueError):
        ar.ArraySpec(1, 0, 0)
    with pytest.raises(ValueError):
        ar.ArraySpec(1, 1, -1)
    spec = ar.ArraySpec(2, 3, 1)
    assert spec.flat_dim == 2 * 36 + 2 * 6


def test_sample_invariants_hold_on_every_sample(bern):
    joinings = [
        jn.product_joining(bern, bern),
        jn.diagonal_joining(bern),
        jn.graph_joining_rotation(sy.circle_rotation(), 0.7),
    ]
    spec = ar.ArraySpec(3, 2, 2)
    for k, joining in enumerate(joinings):
        s = ar.sample_array(joining, spec, np.random.default_rng(50 + k))
        assert np.array_equal(s.dX, s.dX.transpose(1, 0, 3, 2))
        assert np.array_equal(s.dY, s.dY.transpose(1, 0, 3, 2))
        for i in range(3):
            for a in range(2):
                assert s.dX[i, i, a, a] == 0.0
        assert np.all(s.dX <= joining.left.diameter_bound)
        assert np.all((0 <= s.aX) & (s.aX <= joining.left.diameter_bound))
        assert np.all((0 <= s.aY) & (s.aY <= joining.right.diameter_bound))


def test_same_particle_entries_deterministic_for_rotation():
    circ = sy.circle_rotation()
    spec = ar.ArraySpec(2, 3, 0)
    s = ar.sample_array(jn.product_joining(circ, circ), spec, np.random.default_rng(0))
    for i in range(2):
        for a in range(3):
            for b in range(3):
                want = ((b - a) * circ.alpha) % 1.0
                want = min(want, 1.0 - want)
                assert s.dX[i, i, a, b] == pytest.approx(want, abs=1e-12)


def test_empirical_law_base_case_matches_sample_array(bern):
    prod = jn.product_joining(bern, bern)
    spec = ar.ArraySpec(2, 2, 1)
    law = ar.empirical_law(prod, spec, 1, seed=123)
    direct = ar.sample_array(prod, spec, block_stream(123, 0))
    assert np.array_equal(law.samples[0], direct.flatten())


def test_empirical_law_determinism_and_budget(bern):
    prod = jn.product_joining(bern, bern)
    spec = ar.ArraySpec(2, 2, 0)
    a = ar.empirical_law(prod, spec, 300, seed=5)
    b = ar.empirical_law(prod, spec, 300, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert a.provenance["joining"] == prod.jid
    with pytest.raises(ar.BudgetError):
        ar.empirical_law(prod, spec, 300, seed=5, max_entries=100)


def test_mean_pair_distance_matches_series_oracle(bern):
    # E d(X1, X2) = sum of weights / 2 for independent fair windows
    prod = jn.product_joining(bern, bern)
    vals = ar.sample_observable(prod, ar.ArraySpec(2, 1, 0), ar.pair_00(),
                                100_000, seed=31).values
    oracle = float(bern.weights.sum()) / 2.0
    se = vals[:, 0].std(ddof=1) / math.sqrt(vals.shape[0])
    assert abs(vals[:, 0].mean() - oracle) <= 4.0 * se


def test_projection_equals_direct_observable_sampling(bern):
    prod = jn.product_joining(bern, bern)
    spec = ar.ArraySpec(2, 4, 2)
    law = ar.empirical_law(prod, spec, 250, seed=77)
    for obs in (ar.pair_00(), ar.obs_avg_distance(4), ar.obs_mismatch(4, 0.5),
                ar.anchored_pair(),
                ar.ComposedCertificate(ar.squared_gap(0.75), ar.pair_00())):
        via_law = ar.project(law, obs).values
        direct = ar.sample_observable(prod, spec, obs, 250, seed=77).values
        assert np.max(np.abs(via_law - direct)) <= 1e-12
        assert ar.project(law, obs).lipschitz_chain == obs.lipschitz


def test_observable_spec_compatibility_errors(bern):
    with pytest.raises(ValueError):
        ar.pair_00().check_spec(ar.ArraySpec(1, 1, 0))
    with pytest.raises(ValueError):
        ar.obs_avg_distance(4).check_spec(ar.ArraySpec(2, 3, 0))
    with pytest.raises(ValueError):
        ar.anchored_pair().check_spec(ar.ArraySpec(2, 1, 0))
    with pytest.raises(ValueError):
        ar.obs_mismatch(2, 1.5)
    prod = jn.product_joining(bern, bern)
    with pytest.raises(ValueError):
        ar.sample_observable(prod, ar.ArraySpec(1, 1, 0), ar.pair_00(), 10, seed=1)


def test_avg_distance_reduces_to_pair_at_m_1(bern):
    prod = jn.product_joining(bern, bern)
    spec = ar.ArraySpec(2, 1, 0)
    a = ar.sample_observable(prod, spec, ar.obs_avg_distance(1), 100, seed=3).values
    b = ar.sample_observable(prod, spec, ar.pair_00(), 100, seed=3).values
    assert np.array_equal(a, b)


def test_mismatch_fraction_range_and_diagonal():
    P = np.array([[0.7, 0.3], [0.3, 0.7]])
    mk = sy.markov_shift(P, 0.5, 0.5, 12)
    spec = ar.ArraySpec(2, 6, 0)
    obs = ar.obs_mismatch(6, mk.tau)
    vp = ar.sample_observable(jn.product_joining(mk, mk), spec, obs, 500, seed=8).values
    assert np.all((0.0 <= vp) & (vp <= 1.0))
    # under the diagonal coupling the two coordinates are the same variable
    vd = ar.sample_observable(jn.diagonal_joining(mk), spec, obs, 500, seed=9).values
    assert np.array_equal(vd[:, 0], vd[:, 1])
    # the ramp recovers the exact leading-symbol mismatch fraction
    rng = np.random.default_rng(10)
    extX, extY = jn.product_joining(mk, mk).sample_ext_pairs(rng, 400, 6)
    x0, x1 = extX[0::2], extX[1::2]
    frac = (x0[:, :6] != x1[:, :6]).mean(axis=1)
    d = mk.pair_orbit_dists(x0, x1, 6)
    chi = np.clip((d - mk.tau) / (1.0 - mk.tau), 0.0, 1.0)
    assert np.array_equal(chi.mean(axis=1), frac)


def test_diagonal_anchored_pair_identities(bern):
    spec = ar.ArraySpec(1, 1, 1)
    diag = jn.diagonal_joining(bern)
    vd = ar.sample_observable(diag, spec, ar.anchored_pair(), 2000, seed=21).values
    assert np.array_equal(vd[:, 0], vd[:, 1])
    prod = jn.product_joining(bern, bern)
    vp = ar.sample_observable(prod, spec, ar.anchored_pair(), 60_000, seed=22).values
    gap = (vp[:, 0] - vp[:, 1]) ** 2
    se = gap.std(ddof=1) / math.sqrt(gap.size)
    oracle = 2.0 * an.bernoulli_var_R(8)
    assert abs(gap.mean() - oracle) <= 4.0 * se


def _random_flat_pairs(rng, spec, diam, count):
    return (rng.random((count, spec.flat_dim)) * diam,
            rng.random((count, spec.flat_dim)) * diam)


@pytest.mark.parametrize("factory,diam", [
    (lambda m: ar.pair_00(), 0.75),
    (lambda m: ar.obs_avg_distance(m), 0.5),
    (lambda m: ar.obs_mismatch(m, 0.5), 1.5),
    (lambda m: ar.ComposedCertificate(ar.squared_gap(0.75), ar.pair_00()), 0.75),
    (lambda m: ar.ComposedCertificate(ar.abs_gap(), ar.obs_avg_distance(m)), 0.5),
])
def test_declared_lipschitz_constants(factory, diam):
    # difference quotients on random flattened arrays in the value cube
    spec = ar.ArraySpec(2, 5, 0)
    obs = factory(5)
    rng = np.random.default_rng(99)
    u, v = _random_flat_pairs(rng, spec, diam, 400)
    fu = obs.evaluate(ar.slices_from_flat(spec, u, obs.needs))
    fv = obs.evaluate(ar.slices_from_flat(spec, v, obs.needs))
    num = np.linalg.norm(fu - fv, axis=1)
    den = np.linalg.norm(u - v, axis=1)
    assert np.all(num <= obs.lipschitz * den * 1.0001)


def test_squared_gap_certificate_is_1_lipschitz_on_its_square():
    psi = ar.squared_gap(0.5)
    rng = np.random.default_rng(17)
    a = rng.random((1000, 2)) * 0.5
    b = rng.random((1000, 2)) * 0.5
    num = np.abs(psi.fn(a[:, 0], a[:, 1]) - psi.fn(b[:, 0], b[:, 1]))
    den = np.linalg.norm(a - b, axis=1)
    assert np.all(num <= den * 1.0001)


def test_projection_contracts_w1(bern):
    # W1 of projected laws <= Lipschitz constant * W1 of full flattened laws
    spec = ar.ArraySpec(2, 4, 0)
    N = 64
    law_a = ar.empirical_law(jn.diagonal_joining(bern), spec, N, seed=41)
    law_b = ar.empirical_law(jn.product_joining(bern, bern), spec, N, seed=42)
    w_full = tp.wp_assignment(law_a.samples, law_b.samples, p=1).value
    for obs in (ar.pair_00(), ar.obs_avg_distance(4)):
        pa, pb = ar.project(law_a, obs), ar.project(law_b, obs)
        w_proj = tp.wp_assignment(pa.values, pb.values, p=1).value
        assert w_proj <= obs.lipschitz * w_full + 1e-12


def test_exact_cyclic_law_matches_monte_carlo():
    cyc = sy.cyclic_rotation(8, 3)
    joining = jn.graph_joining_rotation(cyc, 2)
    spec = ar.ArraySpec(2, 2, 0)
    exact = an.cyclic_exact_law(joining, spec)
    pts, masses = exact.atoms()
    exact_mean = float((pts.mean(axis=1) * masses).sum())
    law = ar.empirical_law(joining, spec, 40_000, seed=55)
    emp = law.samples.mean(axis=1)
    se = emp.std(ddof=1) / math.sqrt(emp.size)
    assert abs(emp.mean() - exact_mean) <= 4.0 * se
    assert float(exact.total_mass()) == 1.0


def test_csv_round_trip_preserves_samples_and_provenance(tmp_path, bern):
    law = ar.empirical_law(jn.product_joining(bern, bern), ar.ArraySpec(2, 1, 1), 32, seed=3)
    path = tmp_path / "law.csv"
    law.to_csv(path)
    back = ar.EmpiricalLaw.from_csv(path)
    assert np.array_equal(back.samples, law.samples)
    assert back.spec == law.spec
    assert back.provenance["seed"] == 3
    text = path.read_text().splitlines()
    assert text[0].startswith("# {")
    assert len(text) == 1 + 32


def test_flatten_round_trip(bern):
    spec = ar.ArraySpec(2, 2, 3)
    s = ar.sample_array(jn.product_joining(bern, bern), spec, np.random.default_rng(6))
    back = ar.ArraySample.from_flat(spec, s.flatten())
    for name in ("dX", "dY", "aX", "aY"):
        assert np.array_equal(getattr(s, name), getattr(back, name))
    with pytest.raises(ValueError):
        ar.ArraySample.from_flat(spec, np.zeros(3))
