"""Market-based price/return variance, Markowitz variance and the expansion in chi.

The market-based price variance is computed two independent ways:

* directly, as the squared deviation of bucket prices from the VWAP weighted
  by squared bucket volumes, and
* in closed form, ``mu * s(t)**2`` with
  ``mu = (psi**2 - 2*phi + chi**2) / (1 + chi**2)``.

The two agree algebraically; their relative difference is reported as a
numerical health check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeries, DomainError
from .moments import MomentSet, ReturnSeries, moments_from_arrays, returns, series_vwap
from .numerics import mean, relative_difference, total

A_TOLERANCE = 1e-12
# closed form vs weighted form beyond this means numerical trouble
CONSISTENCY_LIMIT = 1e-8


def _arrays(series):
    q = np.asarray(series.values, dtype=float)
    w = np.asarray(series.volumes, dtype=float)
    if q.size < 2:
        raise DegenerateSeries(f"need at least 2 buckets, got {q.size}")
    return q, w


def weighted_price_variance(series) -> float:
    """Phi(t): W**2-weighted mean squared deviation of prices from the VWAP."""
    q, w = _arrays(series)
    s = q / w
    s_bar = total(q) / total(w)
    w2 = w * w
    return total((s - s_bar) ** 2 * w2) / total(w2)


def closed_form_mu(moments: MomentSet) -> float:
    """mu(psi, chi, phi) = (psi**2 - 2 phi + chi**2) / (1 + chi**2).

    Evaluated in rational arithmetic from the exact raw sums when the moment
    set carries them; the three terms nearly cancel when prices barely move.
    """
    if moments.exact_sums is not None:
        n, sq, sw, sqq, sww, sqw = moments.exact_sums
        psi2 = n * sqq / (sq * sq) - 1
        chi2 = n * sww / (sw * sw) - 1
        phi = n * sqw / (sq * sw) - 1
        return float((psi2 - 2 * phi + chi2) / (1 + chi2))
    psi2 = moments.value_cv**2
    chi2 = moments.volume_cv**2
    return math.fsum((psi2, -2.0 * moments.phi, chi2)) / (1.0 + chi2)


def market_based_return_variance(phi: float, ref_price: float) -> float:
    """Theta(t, t0) = Phi(t) / s(t0)**2."""
    if not ref_price > 0:
        raise DomainError(f"reference price must be > 0, got {ref_price}")
    return phi / (ref_price * ref_price)


def markowitz_variance(rets) -> float:
    """Unweighted (1/N) variance of instant returns about their plain mean."""
    r = np.asarray(rets.returns if isinstance(rets, ReturnSeries) else rets, dtype=float)
    if r.size < 2:
        raise DegenerateSeries(f"need at least 2 returns, got {r.size}")
    d = r - mean(r)
    return math.fsum(d * d) / r.size


@dataclass(frozen=True)
class TaylorTerms:
    """Second-order expansion of mu in chi, term by term."""

    constant: float
    linear: float
    quadratic: float

    @property
    def total(self) -> float:
        return self.constant + self.linear + self.quadratic


def _check_taylor_args(psi0, a, chi):
    if abs(a) > 1.0 + A_TOLERANCE:
        raise DomainError(f"covariance coefficient must satisfy |a| <= 1, got {a}")
    if psi0 < 0 or chi < 0:
        raise DomainError(f"coefficients of variation must be >= 0, got psi0={psi0}, chi={chi}")


def taylor_terms(psi0: float, a: float, chi: float, chi_sq: float) -> TaylorTerms:
    """Expansion terms with chi and chi**2 supplied separately.

    Splitting them lets the per-security decomposition pass its own linear
    and quadratic reconstructions of chi.
    """
    psi0_sq = psi0 * psi0
    return TaylorTerms(psi0_sq, -2.0 * a * psi0 * chi, (1.0 - psi0_sq) * chi_sq)


def taylor_mu(psi0: float, a: float, chi: float) -> TaylorTerms:
    """mu_T = psi0**2 - 2 a psi0 chi + (1 - psi0**2) chi**2."""
    _check_taylor_args(psi0, a, chi)
    return taylor_terms(psi0, a, chi, chi * chi)


def taylor_variances(psi0: float, a: float, chi: float, price: float, gross_return: float):
    """(Phi_T, Theta_T) = mu_T * (s(t)**2, R(t, t0)**2)."""
    mu_t = taylor_mu(psi0, a, chi).total
    return mu_t * (price * price), mu_t * (gross_return * gross_return)


def taylor_form_3_3(theta_m: float, gross_return: float, a: float, chi: float) -> float:
    """The expansion written around the Markowitz variance itself.

    ``Theta_M - 2 a sqrt(Theta_M) R chi + (R**2 - Theta_M) chi**2``
    """
    if theta_m < 0:
        raise DomainError(f"Markowitz variance must be >= 0, got {theta_m}")
    if abs(a) > 1.0 + A_TOLERANCE:
        raise DomainError(f"covariance coefficient must satisfy |a| <= 1, got {a}")
    r2 = gross_return * gross_return
    return theta_m - 2.0 * a * math.sqrt(theta_m) * gross_return * chi + (r2 - theta_m) * chi * chi


class Regime(str, enum.Enum):
    HIGH_PSI0 = "HIGH_PSI0"
    LOW_PSI0 = "LOW_PSI0"
    ZERO_COV = "ZERO_COV"
    MIXED = "MIXED"


@dataclass(frozen=True)
class RegimeThresholds:
    high_psi0: float = 0.9
    low_psi0: float = 0.1
    zero_cov: float = 0.05


@dataclass(frozen=True)
class RegimeReport:
    """Limiting-case classification with the asymptotics that apply to it.

    ``approx_theta`` is the regime's leading-order variance, ``limit_theta``
    its value as chi approaches the end of its range, and ``vanishing_point``
    the chi at which the high-psi0 approximation reaches zero (only when that
    lies inside [0, 1]).
    """

    regime: Regime
    psi0: float
    a: float
    chi: float
    gross_return: float
    y: float | None
    approx_theta: float | None
    limit_theta: float | None
    vanishing_point: float | None
    underestimation_ratio: float | None


def classify(psi0: float, a: float, thresholds: RegimeThresholds = RegimeThresholds()) -> Regime:
    if psi0 >= thresholds.high_psi0:
        return Regime.HIGH_PSI0
    if psi0 <= thresholds.low_psi0:
        return Regime.LOW_PSI0
    if abs(a) <= thresholds.zero_cov:
        return Regime.ZERO_COV
    return Regime.MIXED


def regime_analysis(
    psi0: float,
    a: float,
    chi: float,
    gross_return: float = 1.0,
    thresholds: RegimeThresholds = RegimeThresholds(),
) -> RegimeReport:
    regime = classify(psi0, a, thresholds)
    r2 = gross_return * gross_return
    y = chi / psi0 if psi0 > 0 else None
    ratio = (chi * chi) / (psi0 * psi0) if psi0 > 0 else None
    approx = limit = vanish = None
    if regime is Regime.HIGH_PSI0:
        approx = (1.0 - 2.0 * a * chi) * r2
        if a >= 0.5:
            point = 1.0 / (2.0 * a)
            if point <= 1.0:
                vanish = point
                limit = 0.0
        elif a > 0:
            limit = (1.0 - 2.0 * a) * r2
        ratio = None
    elif regime is Regime.LOW_PSI0:
        approx = (psi0 * psi0 + chi * chi) * r2
        limit = chi * chi * r2
    elif regime is Regime.ZERO_COV:
        approx = (psi0 * psi0 + (1.0 - psi0 * psi0) * chi * chi) * r2
        limit = r2
    else:
        ratio = None
    return RegimeReport(regime, psi0, a, chi, gross_return, y, approx, limit, vanish, ratio)


@dataclass(frozen=True)
class VarianceResult:
    """Everything the engine computes for one series against one reference price."""

    moments: MomentSet
    vwap: float
    reference_price: float
    gross_return: float
    phi: float
    phi_closed: float
    theta: float
    theta_closed: float
    theta_markowitz: float
    mu: float
    second_moment_price: float
    taylor: TaylorTerms
    phi_taylor: float
    theta_taylor: float
    theta_taylor_markowitz_form: float
    regime: RegimeReport
    warnings: tuple[str, ...] = field(default=())

    @property
    def mu_taylor(self) -> float:
        return self.taylor.total

    @property
    def closed_form_discrepancy(self) -> float:
        return relative_difference(self.phi, self.phi_closed, self.vwap**2 * 1e-15)

    @property
    def divergence_ratio(self) -> float:
        """Theta / Theta_M; inf when only the Markowitz value is zero."""
        if self.theta_markowitz == 0:
            return 1.0 if self.theta == 0 else math.inf
        return self.theta / self.theta_markowitz


def analyze_series(series, reference_price: float, thresholds: RegimeThresholds = RegimeThresholds()) -> VarianceResult:
    """Run the variance engine on a portfolio (or single security) series."""
    q, w = _arrays(series)
    m = moments_from_arrays(q, w)
    s_t = series_vwap(series)
    gross = s_t / reference_price
    phi = weighted_price_variance(series)
    mu = closed_form_mu(m)
    phi_closed = mu * s_t * s_t
    theta = market_based_return_variance(phi, reference_price)
    theta_closed = mu * gross * gross
    rets = returns(q / w, reference_price)
    theta_m = markowitz_variance(rets)

    warnings = []
    a = m.covariance_coefficient
    if abs(a) > 1.0 + A_TOLERANCE:
        warnings.append(f"measured covariance coefficient {a!r} violates |a| <= 1")
        a = math.copysign(1.0, a)
    chi, psi0 = m.volume_cv, m.price_cv_psi0
    terms = taylor_mu(psi0, a, chi)
    phi_t, theta_t = terms.total * s_t * s_t, terms.total * gross * gross
    theta_t33 = taylor_form_3_3(theta_m, gross, a, chi)

    if relative_difference(phi, phi_closed, s_t * s_t * 1e-15) > CONSISTENCY_LIMIT:
        warnings.append("weighted and closed-form price variances disagree beyond 1e-8")
    if chi > 1.0:
        warnings.append(f"volume CV chi={chi:.6g} exceeds 1, outside the expansion's stated range")
    if psi0 * psi0 > 1.0:
        warnings.append(f"price CV psi0**2={psi0 * psi0:.6g} exceeds 1")
    if theta_t < 0:
        warnings.append("Taylor variance is negative: expansion is outside its range of validity")

    return VarianceResult(
        moments=m,
        vwap=s_t,
        reference_price=float(reference_price),
        gross_return=gross,
        phi=phi,
        phi_closed=phi_closed,
        theta=theta,
        theta_closed=theta_closed,
        theta_markowitz=theta_m,
        mu=mu,
        second_moment_price=phi + s_t * s_t,
        taylor=terms,
        phi_taylor=phi_t,
        theta_taylor=theta_t,
        theta_taylor_markowitz_form=theta_t33,
        regime=regime_analysis(psi0, a, chi, gross, thresholds),
        warnings=tuple(warnings),
    )
