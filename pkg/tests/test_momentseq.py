import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcident import momentseq as ms
from rcident.errors import DataError, InsufficientOrderError


def _double_factorial(n):
    out = 1
    for k in range(n, 0, -2):
        out *= k
    return out


def test_normal_moments_match_double_factorial():
    s = ms.normal_moments(40)
    for m in range(0, 41, 2):
        assert s.values[m] == pytest.approx(_double_factorial(m - 1) if m else 1.0, rel=1e-12)
    assert np.all(s.values[1::2] == 0)


def test_normal_carleman_divergent_with_half_exponent():
    c = ms.carleman_sums(ms.normal_moments(40))
    assert c.divergence_class == "divergent"
    assert c.growth_exponent == pytest.approx(0.5, abs=0.05)


def test_lognormal_carleman_convergent():
    c = ms.carleman_sums(ms.lognormal_moments(40))
    assert c.divergence_class == "convergent"
    r = ms.determinacy_report(ms.lognormal_moments(40))
    assert r.verdict != ms.DETERMINATE


def test_chi2_ratio_tests_pass():
    crit = {c.name: c for c in ms.growth_ratio_tests(ms.chi2_moments(3, K=30))}
    assert crit["hardy"].passed
    assert ms.determinacy_report(ms.chi2_moments(3, K=30)).verdict == ms.DETERMINATE


def test_factorial_passes_and_triple_factorial_fails():
    crit = {c.name: c for c in ms.growth_ratio_tests(ms.factorial_moments(40))}
    assert crit["hardy_root"].passed
    # Stirling: (m!)^(1/2m)/m ~ (m/e)^(1/2)/m -> 0, bounded
    assert crit["hardy_root"].value < 1.0
    bad = ms.growth_ratio_tests(ms.factorial_moments(40, 3))
    assert not any(c.passed for c in bad)


def test_krein_normal_diverges_and_lin_holds():
    r = ms.krein_lin_density_tests(**ms.density_family("normal"))
    crit = {c.name: c for c in r.criteria}
    assert not crit["krein"].passed and math.isinf(crit["krein"].value)
    assert crit["lin"].passed
    assert r.verdict == ms.DETERMINATE


def test_krein_lognormal_finite():
    d = ms.density_family("lognormal")
    r = ms.krein_lin_density_tests(support_class="half_line", **d)
    assert r.verdict == ms.INDETERMINATE


def test_krein_root_exponential_density_finite():
    # f = exp(-|x|^(1/2)) / 4 on the line; -log f/(1+x^2) ~ |x|^(-3/2)
    log_f = lambda x: -math.sqrt(abs(x)) - math.log(4.0)
    f = lambda x: math.exp(log_f(x))
    fp = lambda x: -0.5 * math.copysign(1.0, x) / math.sqrt(abs(x)) * f(x)
    r = ms.krein_lin_density_tests(f, fp, "real_line", (1.0, 1e4), log_f=log_f)
    krein = r.criterion("krein")
    assert krein.passed and np.isfinite(krein.value)
    # oracle: integral of (sqrt|x| + log 4)/(1+x^2) over the line
    from scipy import integrate

    g = lambda x: (math.sqrt(x) + math.log(4.0)) / (1 + x * x)
    oracle = 2 * integrate.quad(g, 0, np.inf, limit=500)[0]
    assert krein.value == pytest.approx(oracle, rel=1e-3)
    assert r.verdict == ms.INDETERMINATE


def test_trace_function_factorial_brute_force():
    M = ms.LogConvexSequence.from_values([math.factorial(m) for m in range(60)])
    brute = max(m * 1.0 - math.lgamma(m + 1) for m in range(1, 10_001))
    assert ms.trace_function(M, 1.0) == pytest.approx(brute, abs=1e-12)


def test_convex_regularization_small():
    Mc = ms.convex_regularization([1.0, 3.0, 4.0])
    # brute force: M^c[m] = sup_x exp(m x - T(x)), T(x) = max_j (j x - log M_j)
    xs = np.arange(0, 20, 1e-4)
    T = np.max(np.stack([j * xs - math.log(v) for j, v in enumerate([1.0, 3.0, 4.0])]), axis=0)
    brute = math.exp(np.max(1 * xs - T))
    # the grid misses the breakpoint log 2 by at most one step
    assert Mc.M[1] == pytest.approx(brute, rel=2e-4)
    assert Mc.M[1] >= brute
    assert Mc.M[1] <= 3.0
    assert Mc.M[1] ** 2 <= Mc.M[0] * Mc.M[2] * (1 + 1e-12)


def test_convex_regularization_fixes_log_convex():
    logs = [m * m * math.log(2) for m in range(12)]
    M = ms.LogConvexSequence(np.array(logs))
    assert M.is_log_convex()
    np.testing.assert_allclose(ms.convex_regularization(M).log_M, logs, rtol=1e-12)


def test_qaw_weights():
    W_log = lambda s: abs(s) / math.log(abs(s)) if abs(s) >= 10 else 0.0
    assert ms.qaw_check(None, log_W=W_log).passed
    assert not ms.qaw_check(lambda s: 1 + s * s).passed


def test_multivariate_determinacy():
    n = ms.normal_moments(40)
    assert ms.multivariate_determinacy([n, n], q=2).verdict == ms.DETERMINATE
    assert ms.multivariate_determinacy([n, ms.lognormal_moments(40)], q=2).verdict == ms.INCONCLUSIVE
    c = ms.chi2_moments(2, K=40)
    assert ms.multivariate_determinacy([c, c], q=0).verdict == ms.DETERMINATE


def test_invalid_sequences_rejected():
    with pytest.raises(DataError):
        ms.MomentSequence.from_values([1.0, 0.0, -1.0, 0.0])
    with pytest.raises(InsufficientOrderError):
        ms.MomentSequence.from_values([1.0, 0.0])
    with pytest.raises(DataError):
        ms.MomentSequence.from_values([1.0, np.nan, 1.0])
    with pytest.raises(DataError):
        ms.MomentSequence.from_values([1.0, 2.0, 1.0], support_class="half_line")


def test_moments_csv_round_trip(tmp_path):
    s = ms.gamma_moments(2.0, K=20)
    p = tmp_path / "m.csv"
    ms.write_moments_csv(p, s)
    back = ms.read_moments_csv(p, "half_line")
    np.testing.assert_allclose(back.values, s.values, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0))
def test_scaling_invariance_of_growth_exponent(c):
    # multiplying X by c shifts log s(m) by m log c, which does not change the growth class
    base = ms.normal_moments(40)
    scaled = ms.MomentSequence(base.log_values + np.arange(41) * math.log(c), base.signs)
    a = ms.carleman_sums(base)
    b = ms.carleman_sums(scaled)
    assert a.divergence_class == b.divergence_class
    assert b.growth_exponent == pytest.approx(a.growth_exponent, abs=0.05)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=12))
def test_convex_regularization_is_log_convex_minorant(logs):
    logs = [0.0] + logs
    M = ms.LogConvexSequence(np.array(logs))
    Mc = ms.convex_regularization(M)
    assert np.all(Mc.log_M <= np.array(logs) + 1e-12)
    assert Mc.is_log_convex(rtol=1e-9)
