import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mbvar.errors import DegenerateSeries, DomainError
from mbvar.moments import moments_from_arrays, returns
from mbvar.numerics import relative_difference
from mbvar.trades import AlignedSeries
from mbvar.variance import (
    Regime,
    RegimeThresholds,
    analyze_series,
    classify,
    closed_form_mu,
    market_based_return_variance,
    markowitz_variance,
    regime_analysis,
    taylor_form_3_3,
    taylor_mu,
    taylor_variances,
    weighted_price_variance,
)

positive = st.floats(1e-4, 1e4, allow_nan=False)
pairs = st.lists(st.tuples(positive, positive), min_size=2, max_size=40)


def series(q, w):
    return AlignedSeries("S", np.array(q, float), np.array(w, float))


def roundoff(phi, s_t):
    """Error budget of the weighted route: rounded bucket prices carry eps * s each."""
    return 1e-10 * phi + 1e-14 * s_t * math.sqrt(max(phi, 0.0)) + 1e-15 * s_t * s_t


def exact_phi(q, w):
    q = [Fraction(x) for x in q]
    w = [Fraction(x) for x in w]
    s_bar = sum(q) / sum(w)
    return sum((qi / wi - s_bar) ** 2 * wi**2 for qi, wi in zip(q, w)) / sum(wi**2 for wi in w)


def exact_mu(q, w):
    s_bar = sum(map(Fraction, q)) / sum(map(Fraction, w))
    return exact_phi(q, w) / s_bar**2


@pytest.mark.parametrize(
    "q,w,expected", [((2, 6), (1, 3), 0.0), ((2, 6), (1, 1), 4.0), ((3, 6, 9), (1, 2, 3), 0.0)]
)
def test_weighted_price_variance_examples(q, w, expected):
    assert weighted_price_variance(series(q, w)) == expected


def test_closed_form_mu_examples():
    assert closed_form_mu(moments_from_arrays([2.0, 6.0], [1.0, 3.0])) == 0.0
    m = moments_from_arrays([2.0, 6.0], [1.0, 1.0])
    assert closed_form_mu(m) == m.price_cv_psi0**2 == 0.25


def test_closed_form_mu_perfect_correlation():
    q, w = [1.0, 2.0, 4.0], [1.0, 2.0, 4.0]
    m = moments_from_arrays(q, w)
    assert abs(closed_form_mu(m)) < 1e-15


def test_return_variance_examples():
    assert market_based_return_variance(4.0, 2.0) == 1.0
    assert market_based_return_variance(0.0, 3.0) == 0.0
    assert 0.25 * 1.25**2 == 0.390625
    with pytest.raises(DomainError):
        market_based_return_variance(1.0, 0.0)


@pytest.mark.parametrize("rets,expected", [((1.0, 3.0), 1.0), ((1.5, 1.5, 1.5), 0.0), ((1.0, 1.0, 4.0), 2.0)])
def test_markowitz_variance_examples(rets, expected):
    assert markowitz_variance(rets) == expected


def test_markowitz_variance_degenerate():
    with pytest.raises(DegenerateSeries):
        markowitz_variance([1.0])


def test_taylor_mu_examples():
    assert taylor_mu(0.0, 0.0, 0.3).total == pytest.approx(0.09, rel=1e-15)
    t = taylor_mu(1.0, 0.4, 0.7)
    assert t.quadratic == 0.0 and t.total == pytest.approx(1 - 2 * 0.4 * 0.7, rel=1e-15)
    t = taylor_mu(0.5, 1.0, 0.1)
    assert (t.constant, t.linear) == (0.25, -0.1)
    assert t.quadratic == pytest.approx(0.0075, rel=1e-14)
    assert t.total == pytest.approx(0.1575, rel=1e-14)


@pytest.mark.parametrize("args", [(0.5, 1.0 + 1e-9, 0.1), (0.5, -1.5, 0.1), (-0.1, 0.0, 0.1), (0.1, 0.0, -0.1)])
def test_taylor_mu_domain(args):
    with pytest.raises(DomainError):
        taylor_mu(*args)


def test_taylor_mu_accepts_rounding_above_one():
    taylor_mu(0.5, 1.0 + 5e-13, 0.1)


def test_taylor_coefficients_match_symbolic_series():
    psi0, a, chi = sp.symbols("psi0 a chi", positive=True)
    mu = (psi0**2 - 2 * a * psi0 * chi + chi**2) / (1 + chi**2)
    poly = sp.series(mu, chi, 0, 3).removeO()
    coeffs = [sp.simplify(poly.coeff(chi, k)) for k in range(3)]
    assert coeffs == [psi0**2, -2 * a * psi0, 1 - psi0**2]
    remainder = sp.series(mu, chi, 0, 4).removeO() - poly
    assert sp.simplify(remainder.coeff(chi, 3)) == 2 * a * psi0
    for p, av, c in [(0.3, 0.2, 0.4), (0.9, -0.7, 0.05), (0.0, 0.0, 1.0)]:
        t = taylor_mu(p, av, c)
        assert t.total == pytest.approx(float(poly.subs({psi0: p, a: av, chi: c})), rel=1e-12, abs=1e-15)


def test_taylor_variances_examples():
    phi_t, theta_t = taylor_variances(0.3, 0.5, 0.0, 2.0, 1.5)
    assert theta_t == pytest.approx(0.09 * 2.25, rel=1e-15)
    assert phi_t == pytest.approx(0.09 * 4.0, rel=1e-15)
    assert taylor_variances(1.0, 0.5, 1.0, 1.0, 1.0)[1] == 0.0
    assert taylor_variances(0.1, 0.0, 0.5, 1.0, 2.0)[1] == pytest.approx(1.03, rel=1e-14)


def test_form_3_3_examples():
    assert taylor_form_3_3(4.0, 2.0, 0.3, 0.5) == pytest.approx(4.0 * (1 - 2 * 0.3 * 0.5), rel=1e-14)
    assert taylor_form_3_3(0.7, 1.3, 0.9, 0.0) == 0.7
    assert taylor_form_3_3(0.25, 1.0, 1.0, 0.1) == pytest.approx(0.1575, rel=1e-14)
    with pytest.raises(DomainError):
        taylor_form_3_3(-1.0, 1.0, 0.0, 0.1)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1.5), st.floats(-1, 1), st.floats(0, 1), st.floats(0.01, 10))
def test_form_equivalence(psi0, a, chi, r):
    theta_m = (psi0 * r) ** 2
    implied_psi0 = math.sqrt(theta_m) / r
    direct = taylor_variances(implied_psi0, a, chi, 1.0, r)[1]
    via_m = taylor_form_3_3(theta_m, r, a, chi)
    scale = max(abs(direct), theta_m, r * r * chi * chi, 1e-300)
    assert abs(direct - via_m) <= 1e-12 * scale


def test_regime_classification_and_thresholds():
    assert classify(0.95, 0.6) is Regime.HIGH_PSI0
    assert classify(0.05, 0.0) is Regime.LOW_PSI0
    assert classify(0.3, 0.01) is Regime.ZERO_COV
    assert classify(0.3, 0.4) is Regime.MIXED
    assert classify(0.3, 0.4, RegimeThresholds(high_psi0=0.25)) is Regime.HIGH_PSI0


def test_regime_high_vanishing_point():
    rep = regime_analysis(1.0, 0.6, 1 / 1.2)
    assert rep.regime is Regime.HIGH_PSI0
    assert rep.vanishing_point == pytest.approx(0.8333333333333334, rel=1e-15)
    assert rep.approx_theta == pytest.approx(0.0, abs=1e-15)
    assert rep.y == pytest.approx(1 / 1.2)


def test_regime_high_no_vanishing_when_a_small():
    rep = regime_analysis(1.0, 0.3, 0.5)
    assert rep.vanishing_point is None
    assert rep.limit_theta == pytest.approx(0.4)


def test_regime_low_underestimation():
    rep = regime_analysis(0.05, 0.0, 0.5)
    assert rep.regime is Regime.LOW_PSI0
    assert rep.underestimation_ratio == pytest.approx(100.0, rel=1e-12)
    assert rep.approx_theta == pytest.approx(0.0025 + 0.25)
    assert rep.limit_theta == pytest.approx(0.25)


def test_regime_zero_cov():
    rep = regime_analysis(0.3, 0.0, 1.0, gross_return=1.7)
    assert rep.regime is Regime.ZERO_COV
    assert rep.limit_theta == pytest.approx(1.7**2)
    assert rep.approx_theta == pytest.approx(1.7**2, rel=1e-15)


@settings(max_examples=300, deadline=None)
@given(pairs)
def test_exact_identity_and_fraction_oracle(data):
    q, w = zip(*data)
    s = series(q, w)
    phi = weighted_price_variance(s)
    exact = float(exact_phi(q, w))
    assert abs(phi - exact) <= roundoff(exact, sum(q) / sum(w))
    # exact raw sums make the closed form correctly rounded
    assert closed_form_mu(moments_from_arrays(q, w)) == float(exact_mu(q, w))
    assert phi >= 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(positive, min_size=2, max_size=40), positive, positive)
def test_constant_volume_reduction(prices, vol, ref):
    p = np.array(prices)
    s = series(p * vol, np.full(p.size, vol))
    r = analyze_series(s, ref)
    assert relative_difference(r.theta, markowitz_variance(returns(p, ref)), r.gross_return**2 * 1e-15) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(pairs, positive)
def test_analyze_series_consistency(data, ref):
    q, w = zip(*data)
    r = analyze_series(series(q, w), ref)
    s2 = r.vwap**2
    # E[s^2] - s^2 cancels at the scale of E[s^2]
    assert abs((r.second_moment_price - s2) - r.phi) <= 1e-15 * r.second_moment_price
    tol = roundoff(r.phi, r.vwap)
    assert abs(r.phi_closed - r.phi) <= tol
    assert abs(r.theta_closed - r.theta) <= tol / ref**2 * (1 + 1e-12)
    assert r.phi >= -1e-12 * s2


def test_analyze_series_worked_example():
    r = analyze_series(series([2, 6], [1, 3]), 1.0)
    assert (r.phi, r.theta, r.theta_markowitz, r.mu, r.gross_return) == (0.0, 0.0, 0.0, 0.0, 2.0)
    assert r.divergence_ratio == 1.0


def test_analyze_series_flat_volume_example():
    r = analyze_series(series([2, 6], [1, 1]), 2.0)
    assert (r.theta, r.theta_markowitz, r.divergence_ratio) == (1.0, 1.0, 1.0)


def test_negative_taylor_warned_not_clamped():
    # psi0 = 1 with strong value/volume correlation pushes 1 - 2 a chi below zero
    w = np.array([1.0, 9.0, 1.0, 9.0])
    p = np.array([1.0, 3.0, 1.0, 3.0])
    r = analyze_series(series(p * w, w), 1.0)
    assert r.theta_taylor < 0
    assert any("negative" in m for m in r.warnings)


def test_chi_above_one_warns():
    w = np.array([1.0, 1.0, 1.0, 100.0])
    r = analyze_series(series(2 * w, w), 2.0)
    assert r.moments.volume_cv > 1
    assert any("exceeds 1" in m for m in r.warnings)
