import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from rcident import riesz_basis as rb
from rcident.errors import IllConditionedError, PreconditionError


@pytest.mark.parametrize("r", [1.1, math.e, 10.0])
def test_kadec_passes(r):
    k = rb.kadec_check(rb.ExponentSystem.symmetric(25, r))
    assert k.passed
    assert k.deviation_coefficient == Fraction(1, 5)
    assert k.deviation == pytest.approx(0.2 / r)


def test_kadec_fails_for_large_perturbation():
    assert not rb.kadec_check(rb.ExponentSystem.symmetric(5, 1.1, coefficient=Fraction(3, 10))).passed
    # boundary: c / r = 1/4 exactly is not < 1/4
    assert not rb.kadec_check(rb.ExponentSystem.symmetric(5, 2.0, coefficient=Fraction(1, 2))).passed


def test_independence_small_and_medium():
    small = rb.exponent_independence(rb.ExponentSystem.symmetric(2), 6)
    assert small.independent and small.complete
    med = rb.exponent_independence(rb.ExponentSystem.symmetric(4), 6)
    assert med.independent and med.complete and med.n_checked == 3002


def test_integer_frequencies_have_witness():
    res = rb.exponent_independence(rb.ExponentSystem.symmetric(2, coefficient=0), 2)
    assert not res.independent
    sys = rb.ExponentSystem.symmetric(2, coefficient=0)
    b = np.array(res.witness)
    assert b.sum() >= 1 and np.dot(b, sys.lambdas) == 0


def test_gram_entries_against_quadrature():
    sys = rb.ExponentSystem.symmetric(6)
    G = rb.gram_matrix(sys)
    lam = sys.lambdas
    for a, b in [(0, 0), (0, 5), (3, 8), (11, 2)]:
        re = integrate.quad(lambda z: math.cos(math.pi * (lam[a] - lam[b]) * z), -1, 1)[0]
        im = integrate.quad(lambda z: math.sin(math.pi * (lam[a] - lam[b]) * z), -1, 1)[0]
        assert abs(G[a, b] - complex(re, im)) <= 1e-12


def test_gram_positive_definite_baseline():
    g = rb.gram_frame_bounds(rb.ExponentSystem.symmetric(25))
    assert g.min_eig > 0
    # regression baseline for r = e, |J| = 50, T = 1
    assert g.min_eig == pytest.approx(1.770351, abs=1e-5)
    assert g.max_eig == pytest.approx(2.224503, abs=1e-5)


def test_biorthogonal_reproduces_basis_elements():
    sys = rb.ExponentSystem.symmetric(10)
    for j0 in (0, 7, 19):
        e = rb.biorthogonal_expand(sys, lambda z, j0=j0: sys.basis(z)[:, j0])
        u = np.zeros(len(sys.J))
        u[j0] = 1
        assert np.max(np.abs(e.coefficients - u)) <= 1e-8
        assert e.residual <= 1e-8


def test_residual_for_identity_decreases():
    res = [rb.biorthogonal_expand(rb.ExponentSystem.symmetric(n), lambda z: z).residual for n in range(1, 11)]
    assert all(b < a for a, b in zip(res, res[1:]))


def test_ill_conditioned_guard():
    with pytest.raises(IllConditionedError):
        rb.biorthogonal_expand(rb.ExponentSystem.symmetric(3), lambda z: z, cond_limit=1.0)


def test_snl_quantiles_brute_force():
    sys = rb.ExponentSystem.symmetric(3)
    thetas = [0.5, -1.0]
    w = [0.3, 0.7]
    coef = lambda th: {0: th, 1: th / 2, -1: th / 2, 2: 0.1j * th}
    x = np.array([1.5 * sys.T])
    out = rb.snl_forward_extrapolate(sys, thetas, w, coef, x)
    per_atom = []
    for th in thetas:
        c = coef(th)
        per_atom.append(c[0] + sum(c.get(j, 0) * np.exp(1j * math.pi * lam * x[0]) for j, lam in zip(sys.J, sys.lambdas)))
    per_atom = np.real(per_atom)
    lo, hi = sorted(zip(per_atom, w))
    assert out.quantiles[0.1][0] == pytest.approx(lo[0])
    assert out.quantiles[0.9][0] == pytest.approx(hi[0])
    assert out.mean[0] == pytest.approx(np.dot(per_atom, w))


def test_invalid_systems():
    with pytest.raises(PreconditionError):
        rb.ExponentSystem(r=0.5)
    with pytest.raises(PreconditionError):
        rb.ExponentSystem(J=(0, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.floats(1.05, 20.0))
def test_frequencies_increasing_with_kadec(n, r):
    sys = rb.ExponentSystem.symmetric(n, r)
    assert sys.is_increasing()
    dev = np.max(np.abs(sys.lambdas - np.array(sys.J)))
    assert dev == pytest.approx(0.2 / r, rel=1e-12)
    assert (dev < 0.25) == rb.kadec_check(sys).passed


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8))
def test_gram_hermitian(n):
    G = rb.gram_matrix(rb.ExponentSystem.symmetric(n))
    np.testing.assert_allclose(G, G.conj().T, atol=1e-14)
    assert np.allclose(np.diag(G), 2.0)
