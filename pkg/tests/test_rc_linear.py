import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcident import rc_linear as rl
from rcident.cfgrid import CharFnGrid
from rcident.laws import ScalarLaw
from rcident.uniqueness import SupportSet, polynomial_uniqueness_rank

ATOMS = np.array([[0.5, 1.0, -0.5], [-0.3, 0.2, 0.8], [1.1, -0.7, 0.1], [0.0, 0.4, -0.9]])
WEIGHTS = np.array([0.1, 0.2, 0.3, 0.4])


def model():
    return rl.RCModel(ATOMS, WEIGHTS)


def test_conditional_moments_match_simulation():
    V = SupportSet.from_points(np.array([[0.7, -1.2]]))
    n = 1_000_000
    _, y = rl.simulate_linear(model(), V, n, seed=11)
    tab = rl.conditional_moments(model(), V, 3)
    for k in range(1, 4):
        est = np.mean(y**k)
        se = np.std(y**k) / np.sqrt(n)
        assert abs(est - tab.values[0, k]) <= 3 * se


def test_simulation_is_reproducible():
    V = SupportSet.grid([[0.0, 1.0], [2.0]])
    a = rl.simulate_linear(model(), V, 50, seed=3)
    b = rl.simulate_linear(model(), V, 50, seed=3)
    assert np.array_equal(a[1], b[1])


def test_index_moment_design_brute_force():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 2))
    D, J = rl.index_moment_design(3, x)
    assert D.shape == (5, 10)
    for _ in range(5):
        g = rng.normal(size=3)
        mono = np.array([np.prod(g ** np.array(j)) for j in J])
        np.testing.assert_allclose(D @ mono, (g[0] + x @ g[1:]) ** 3, rtol=1e-12)


def test_parabola_flagged():
    V = SupportSet.parabola(np.linspace(-1, 2, 10))
    _, reps = rl.recover_mixed_moments(rl.conditional_moments(model(), V, 2))
    assert reps[0].identified
    assert not reps[1].identified and reps[1].rank == 5 and reps[1].nullspace is not None


def test_fan_recovers_all_moments():
    V = SupportSet.fan([1, 2, 3, 4, 5], 40)
    rec, reps = rl.recover_mixed_moments(rl.conditional_moments(model(), V, 4))
    assert all(r.identified for r in reps)
    assert rec.max_relative_error(rl.MixedMomentSet.from_atoms(ATOMS, WEIGHTS, 4)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.booleans())
def test_flag_iff_homogeneous_rank_fails(seed, k, on_parabola):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    x = rng.uniform(-2, 2, n)
    pts = np.column_stack([x, x**2]) if on_parabola else rng.uniform(-2, 2, (n, 2))
    V = SupportSet.from_points(pts)
    _, reps = rl.recover_mixed_moments(rl.conditional_moments(model(), V, k))
    # degree-k homogeneous design in (1, x) equals the inhomogeneous degree-k design on x
    r = polynomial_uniqueness_rank(V, k)
    assert reps[k - 1].identified == r.full_rank


def test_counterexample_parabola():
    ce = rl.build_counterexample({(2, 0): 1.0, (0, 1): -1.0}, p=2)
    assert abs(ce.h_integral) <= 1e-8
    assert ce.min_density >= -1e-12
    assert ce.tv_distance >= 1e-2
    xs = np.linspace(-1, 1, 20)
    base, pert = ce.index_moments(np.column_stack([xs, xs**2]), 3)
    assert np.max(np.abs(base - pert)) <= 1e-6
    # off the parabola the laws separate, first at order 5 (the bump factors are odd)
    b2, p2 = ce.index_moments(np.column_stack([xs, xs**2 + 0.5]), 5)
    assert np.max(np.abs(b2 - p2)[:, :5]) <= 1e-6
    assert np.max(np.abs(b2 - p2)[:, 5]) > 1e-2
    b3, p3 = ce.index_moments(np.column_stack([xs, xs**2]), 7)
    assert np.max(np.abs(b3 - p3)) <= 1e-12


def test_bump_derivatives_exact_vs_fd():
    g = np.linspace(-0.9, 0.9, 37)
    for n in range(1, 4):
        exact = rl.bump_derivative(g, n)
        # nested central differences with step 1e-3 carry an O(h^2) error
        np.testing.assert_allclose(exact, rl.bump_derivative_fd(g, n), atol=1e-3 * np.abs(exact).max())


def test_two_atom_reconstruction():
    atoms = np.array([[0.2, -0.5], [-0.4, 0.9]])
    w = np.array([0.35, 0.65])
    mom = rl.MixedMomentSet.from_atoms(atoms, w, 4)
    grid = np.vstack([atoms, np.random.default_rng(1).uniform(-1, 1, (15, 2))])
    rec = rl.reconstruct_distribution(mom, grid)
    assert rec.feasible and rec.unique
    np.testing.assert_allclose(rec.weights[:2], w, atol=1e-6)
    assert np.all(rec.weights[2:] <= 1e-6)


def test_partial_fourier_slice_direct_sum():
    atoms = np.array([[0.1, 0.5, -1.0], [2.0, -0.3, 0.4], [-1.0, 1.5, 0.0]])
    w = np.array([0.2, 0.5, 0.3])
    xi = np.random.default_rng(2).normal(size=(100, 2))
    got = rl.partial_fourier_slice(rl.RCModel(atoms, w), 1.0, xi)
    for i in range(100):
        direct = sum(w[a] * np.exp(1j * (atoms[a, 0] + xi[i] @ atoms[a, 1:])) for a in range(3))
        assert abs(got[i] - direct) <= 1e-13


def test_affine_pullback_matches_transformed_atoms():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(2, 2)) + 2 * np.eye(2)
    xbar = rng.normal(size=2)
    V = SupportSet.fan([1, 2, 3], 12)
    newV, pull = rl.affine_reparametrize(V, M, xbar, K=3)
    L = pull.transform
    new_atoms = ATOMS @ L.T
    want = rl.MixedMomentSet.from_atoms(new_atoms, WEIGHTS, 3)
    got = pull(rl.MixedMomentSet.from_atoms(ATOMS, WEIGHTS, 3))
    for m in want.indices():
        assert got.entries[m] == pytest.approx(want.entries[m], abs=1e-10, rel=1e-10)
    # the index is unchanged
    i_old = rl.RCModel(ATOMS, WEIGHTS).index_values(V.points)
    i_new = rl.RCModel(new_atoms, WEIGHTS).index_values(newV.points)
    np.testing.assert_allclose(i_old, i_new, atol=1e-12)


def test_independent_marginals_sinc():
    alpha, beta = ScalarLaw("normal"), ScalarLaw("uniform")
    t = CharFnGrid.symmetric(5.0, 0.01, alpha.cf).t
    c0 = CharFnGrid(t, alpha.cf(t))
    c1 = CharFnGrid(t, alpha.cf(t) * beta.cf(2 * t))
    out = rl.independent_marginals_recover([c0, c1], [[2.0]], mode="full_grid")
    b = out.betas[0]
    assert np.max(np.abs(b.values - beta.cf(b.t))) <= 1e-8


def test_independent_marginals_compact_cf():
    alpha, beta = ScalarLaw("triangular_cf"), ScalarLaw("uniform")
    t = CharFnGrid.symmetric(3.0, 0.01, alpha.cf).t
    c0 = CharFnGrid(t, alpha.cf(t))
    c1 = CharFnGrid(t, alpha.cf(t) * beta.cf(t))
    out = rl.independent_marginals_recover([c0, c1], [[1.0]], mode="near_zero")
    assert out.t0 == pytest.approx(1.0, abs=0.02)
    np.testing.assert_allclose(out.moments[1], [1, 0, 1 / 3, 0, 0.2], atol=1e-6)
