import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from rcident import deconv_panel as dp
from rcident.cfgrid import CharFnGrid
from rcident.errors import DataError, PreconditionError
from rcident.laws import ScalarLaw
from rcident.rc_linear import MixedMomentSet
from rcident.rng import make_rng

ATOMS = np.array([[0.5, 1.0, -0.5], [-0.3, 0.2, 0.8], [1.1, -0.7, 0.1], [0.0, 0.4, -0.9]])
WEIGHTS = np.array([0.1, 0.2, 0.3, 0.4])


def test_two_sample_normal():
    n = ScalarLaw("normal")
    err = CharFnGrid.symmetric(5.0, 0.01, n.cf)
    tot = CharFnGrid.symmetric(5.0, 0.01, lambda t: n.cf(t) ** 2)
    out = dp.two_sample_deconvolution(err, tot)
    assert np.max(np.abs(out.values - np.exp(-0.5 * out.t**2))) <= 1e-8


def test_kotlarski_population():
    d, e1, e2 = ScalarLaw("cauchy"), ScalarLaw("uniform"), ScalarLaw("triangular_cf")
    res = dp.kotlarski_recover(*dp.kotlarski_population_inputs(d, e1, e2))
    for g, law in ((res.phi_delta, d), (res.phi_e1, e1), (res.phi_e2, e2)):
        assert np.max(np.abs(g.values - law.cf(g.t))) <= 1e-6
    assert res.method == "joint_band"


def test_kotlarski_crosses_sinc_zeros_and_refines():
    # zeros of phi_e1 at every integer t, all on the grid
    d, e1, e2 = ScalarLaw("cauchy"), ScalarLaw("uniform", {"low": -math.pi, "high": math.pi}), ScalarLaw("laplace")
    g1, g2, gd, band = dp.kotlarski_population_inputs(d, e1, e2, 5.0, 0.01)
    res = dp.kotlarski_recover(g1, g2, gd, band)
    assert res.zeros["phi_e1"] == [-5.0, -4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    # no jump across the zeros of phi_e1
    assert np.max(np.abs(np.diff(res.phi_delta.values))) <= 0.05
    assert np.max(np.abs(res.phi_delta.values - d.cf(res.phi_delta.t))) <= 1e-6
    errs = dp.refinement_check(d, e1, e2, steps=(1e-2, 5e-3))
    assert errs[1] < errs[0] <= 1e-6


def test_kotlarski_without_band_is_flagged():
    d, e1, e2 = ScalarLaw("normal"), ScalarLaw("uniform"), ScalarLaw("normal", {"scale": 0.5})
    g1, g2, gd, _ = dp.kotlarski_population_inputs(d, e1, e2)
    res = dp.kotlarski_recover(g1, g2, gd)
    assert res.method == "symmetric_moment_extension"
    # the low-order moments survive; the global CF is only an approximation
    np.testing.assert_allclose(res.moments_e1, [1, 0, 1 / 3, 0, 0.2], atol=1e-6)
    assert res.residuals["reconstruction"] <= 1e-8


def test_kotlarski_sample_mode():
    d, e1, e2 = ScalarLaw("normal"), ScalarLaw("uniform"), ScalarLaw("laplace", {"scale": 0.5})
    n = 50_000
    dd = d.sample(make_rng(1), n)
    y1, y2 = dd + e1.sample(make_rng(2), n), dd + e2.sample(make_rng(3), n)
    from rcident.cfgrid import ecf

    band = dp.JointBand.from_sample(y1, y2, 0.01, 200)
    res = dp.kotlarski_recover(ecf(y1, 2.0), ecf(y2, 2.0), ecf(y2 - y1, 2.0), band)
    assert np.max(np.abs(res.phi_e1.values - e1.cf(res.phi_e1.t))) <= 0.05


def _sympy_inverse(x):
    V = sympy.Matrix([[sympy.Rational(xi) ** k for k in range(len(x))] for xi in x])
    return np.array(V.inv().tolist(), dtype=float)


def test_vandermonde_closed_form_exact_oracle():
    x = [sympy.Rational(1, 3), sympy.Rational(-7, 5), sympy.Rational(2)]
    b = dp.inverse_vandermonde_entries([float(v) for v in x])
    inv = _sympy_inverse(x)
    np.testing.assert_allclose(b.T, inv, rtol=1e-14)


@pytest.mark.parametrize("T", [2, 3])
def test_vandermonde_random_points(T):
    rng = make_rng(21, T)
    for _ in range(100):
        x = rng.uniform(0.3, 2.0, T) * rng.choice([-1.0, 1.0], T)
        b = dp.inverse_vandermonde_entries(x)
        inv = np.linalg.inv(dp.vandermonde(x))
        assert np.max(np.abs(b.T - inv)) <= 1e-12 * np.max(np.abs(inv))


def test_theta_direct_solve():
    r = dp.theta_change_of_variables([1.0, 0.0], [1.0, 2.0])
    # V^T s = e1 with x = (1, 2): s = (2, -1); Theta = s . x^2 = 2 - 4
    assert r.theta == pytest.approx(-2.0, abs=1e-12)
    assert abs(r.theta - r.direct_theta) <= 1e-12


def test_degenerate_points_rejected():
    with pytest.raises(PreconditionError):
        dp.theta_change_of_variables([1.0, 0.0], [1.0, 1.0])
    with pytest.raises(PreconditionError):
        dp.theta_change_of_variables([1.0, 0.0], [0.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-9, 9).filter(lambda v: v != 0), min_size=2, max_size=4, unique=True))
def test_closed_form_times_vandermonde_is_identity(xs):
    x = np.array(xs, dtype=float) / 3.0
    b = dp.inverse_vandermonde_entries(x)
    np.testing.assert_allclose(b.T @ dp.vandermonde(x), np.eye(x.size), atol=1e-9)


def _panel(errors=({"kind": "uniform"}, {"kind": "normal", "params": {"scale": 0.5}}), atoms=ATOMS):
    return dp.PanelModel(atoms, WEIGHTS, errors, 0.7)


def test_stayer_error_recovery_T3():
    atoms = np.column_stack([ATOMS, [0.2, -0.1, 0.3, 0.05]])
    m = dp.PanelModel(atoms, WEIGHTS, ({"kind": "uniform"},) * 3, 0.7)
    rec = dp.panel_epsilon_recover(dp.stayer_population_inputs(m))
    for g, e in zip(rec.phi_eps, m.errors):
        assert np.max(np.abs(g.values - e.cf(g.t))) <= 1e-6


def test_panel_joint_moments_and_single_period_flag():
    m = _panel()
    pts = make_rng(31).uniform(0.3, 2.0, (20, 2))
    em = [e.moments(3) for e in m.errors]
    rec, reps = dp.panel_moment_recover(dp.panel_conditional_moments(m, pts, 3), em)
    assert all(r.identified for r in reps)
    assert rec.max_relative_error(MixedMomentSet.from_atoms(ATOMS, WEIGHTS, 3)) <= 1e-7
    _, single = dp.panel_moment_recover(dp.panel_conditional_moments(m, pts, 3, cross_period=False), em)
    assert single[0].identified and not single[1].identified


def test_panel_simulation_matches_population_moments():
    m = _panel()
    pts = np.array([[0.5, 1.5]])
    rows = dp.simulate_panel(m, pts, 100_000, seed=4)
    Y = np.array([r[2] for r in rows]).reshape(-1, 2)
    tab = dp.panel_conditional_moments(m, pts, 2)
    col = {k: c for c, k in enumerate(tab.orders)}
    for k in [(1, 0), (0, 1), (1, 1), (2, 0)]:
        v = Y[:, 0] ** k[0] * Y[:, 1] ** k[1]
        assert abs(v.mean() - tab.values[0, col[k]]) <= 4 * v.std() / math.sqrt(v.size)


def test_panel_csv_round_trip_and_missing_period(tmp_path):
    rows = dp.simulate_panel(_panel(), np.array([[0.5, 1.5]]), 5, seed=1)
    p = tmp_path / "panel.csv"
    dp.write_panel_csv(rows, p)
    units, Y, X = dp.read_panel_csv(p)
    assert Y.shape == (5, 2) and np.all(X == [0.5, 1.5])
    dp.write_panel_csv([r for r in rows if not (r[0] == 3 and r[1] == 2)], p)
    with pytest.raises(DataError, match="unit 3"):
        dp.read_panel_csv(p)


def test_panel_model_validation():
    with pytest.raises(DataError):
        _panel(errors=({"kind": "uniform", "params": {"low": 0.0}}, {"kind": "uniform"}))
    with pytest.raises(DataError):
        _panel(errors=({"kind": "uniform"},))


def test_single_index_monotone_invariance():
    rng = make_rng(8)
    n = 10_000
    a = rng.uniform(-math.pi / 2, math.pi / 2, n)
    gamma = np.column_stack([np.cos(a), np.sin(a)])
    x1, x2 = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
    ys = [dp.single_index_reduce(*dp.simulate_single_index(gamma, x1, x2, f), x1, x2).y
          for f in (None, np.exp, np.arctan)]
    assert np.array_equal(ys[0], ys[1]) and np.array_equal(ys[0], ys[2])


def test_single_index_stayers_and_noise():
    n = 2000
    rng = make_rng(9)
    gamma = rng.normal(size=(n, 2))
    x1 = rng.normal(size=(n, 2))
    x2 = x1.copy()
    x2[n // 2:] += 1.0
    z1, z2 = dp.simulate_single_index(gamma, x1, x2, noise=[{"kind": "normal"}, {"kind": "normal"}], seed=2)
    ds = dp.single_index_reduce(z1, z2, x1, x2, noise=True)
    assert ds.stayers == n // 2 and not ds.degenerate
    assert ds.noise_cf is not None
    # Y2 - Y1 at stayers is a difference of two standard normals
    sel = np.abs(ds.noise_cf.t) <= 2
    assert np.max(np.abs(ds.noise_cf.values[sel] - np.exp(-ds.noise_cf.t[sel] ** 2))) <= 0.15
    with pytest.raises(PreconditionError):
        dp.single_index_reduce(z1[n // 2:], z2[n // 2:], x1[n // 2:], x2[n // 2:], noise=True)
