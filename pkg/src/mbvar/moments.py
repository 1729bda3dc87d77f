"""Means, coefficients of variation, VWAP and gross returns.

All variances use the biased 1/N convention.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateSeries, DomainError, EmptyList, UnknownSecurity, ZeroWeightSum
from .numerics import central_moment2, exact_dot, exact_sum, frozen, mean, total
from .trades import PortfolioSpec

# below this product of CVs the value/volume correlation is undefined
COV_COEFF_FLOOR = 1e-14


def raw_moments(values, n: int) -> float:
    """(1/N) * sum x_i**n."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyList("moment of an empty list")
    return math.fsum(x**n) / x.size


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of a (value, volume) trade series.

    ``psi0`` is the unweighted coefficient of variation of bucket prices; it
    is the zero-volume-fluctuation reference point of the Taylor expansion.
    """

    n: int
    mean_value: float
    mean_volume: float
    mean_sq_value: float
    mean_sq_volume: float
    sigma_value: float
    sigma_volume: float
    value_cv: float
    volume_cv: float
    cov_qw: float
    phi: float
    price_cv_psi0: float
    price_mean: float
    # exact (N, sum q, sum w, sum q^2, sum w^2, sum q w) for cancellation-free formulas
    exact_sums: tuple[Fraction, ...] | None = field(default=None, repr=False, compare=False)

    @property
    def psi(self) -> float:
        return self.value_cv

    @property
    def chi(self) -> float:
        return self.volume_cv

    @property
    def psi0(self) -> float:
        return self.price_cv_psi0

    @property
    def covariance_coefficient(self) -> float:
        """a = phi / (psi * chi), or 0 when either CV vanishes."""
        denom = self.value_cv * self.volume_cv
        if denom <= COV_COEFF_FLOOR:
            return 0.0
        return self.phi / denom

    a = covariance_coefficient

    @property
    def psi0_exceeds_one(self) -> bool:
        return self.price_cv_psi0**2 > 1.0


def moments_from_arrays(values, volumes) -> MomentSet:
    q = np.asarray(values, dtype=float)
    w = np.asarray(volumes, dtype=float)
    if q.shape != w.shape:
        raise DegenerateSeries("values and volumes differ in length")
    if q.size < 2:
        raise DegenerateSeries(f"need at least 2 buckets, got {q.size}")
    q1, w1 = mean(q), mean(w)
    var_q, var_w = central_moment2(q), central_moment2(w)
    cov = central_moment2(q, w)
    s = q / w
    s_mean = mean(s)
    return MomentSet(
        n=q.size,
        mean_value=q1,
        mean_volume=w1,
        mean_sq_value=raw_moments(q, 2),
        mean_sq_volume=raw_moments(w, 2),
        sigma_value=math.sqrt(var_q),
        sigma_volume=math.sqrt(var_w),
        value_cv=math.sqrt(var_q) / q1,
        volume_cv=math.sqrt(var_w) / w1,
        cov_qw=cov,
        phi=cov / (q1 * w1),
        price_cv_psi0=math.sqrt(central_moment2(s)) / s_mean,
        price_mean=s_mean,
        exact_sums=(
            Fraction(q.size), exact_sum(q), exact_sum(w), exact_dot(q, q), exact_dot(w, w), exact_dot(q, w)
        ),
    )


def moment_set(series) -> MomentSet:
    """Moments of any series exposing ``values`` and ``volumes`` arrays."""
    return moments_from_arrays(series.values, series.volumes)


def vwap(prices, volumes) -> float:
    p = np.asarray(prices, dtype=float)
    w = np.asarray(volumes, dtype=float)
    if np.any(w < 0):
        raise DomainError("negative weight")
    denom = total(w)
    if denom == 0:
        raise ZeroWeightSum("weights sum to zero")
    return total(p * w) / denom


def series_vwap(series) -> float:
    """Q_Sigma / W_Sigma of a value/volume series."""
    return total(series.values) / total(series.volumes)


def vwap_decomposition_check(spec: PortfolioSpec, security_vwaps: Mapping[str, float]) -> float:
    """sum_j p_j(t) x_j(t0); equals the portfolio VWAP s(t)."""
    for sid in security_vwaps:
        if sid not in spec.holdings:
            raise UnknownSecurity(f"{sid!r} is not in the portfolio")
    x = spec.share_weights()
    try:
        return total([security_vwaps[j] * x[j] for j in spec.securities])
    except KeyError as exc:
        raise UnknownSecurity(f"missing VWAP for {exc.args[0]!r}") from None


@dataclass(frozen=True)
class ReturnSeries:
    """Instant gross returns p(t_i)/p(t0) and their window average."""

    returns: np.ndarray
    reference_price: float
    average: float

    def __post_init__(self):
        object.__setattr__(self, "returns", frozen(self.returns))

    @property
    def n(self) -> int:
        return self.returns.size


def returns(prices, reference_price: float, volumes=None) -> ReturnSeries:
    """Gross returns against ``reference_price``.

    With ``volumes`` the average is volume weighted, so it equals
    VWAP / reference price; without, it is the plain mean (the constant
    volume case).
    """
    if not reference_price > 0:
        raise DomainError(f"reference price must be > 0, got {reference_price}")
    r = np.asarray(prices, dtype=float) / reference_price
    if r.size == 0:
        raise EmptyList("no prices")
    avg = vwap(r, volumes) if volumes is not None else mean(r)
    return ReturnSeries(r, float(reference_price), avg)


def portfolio_return_decomposition(spec: PortfolioSpec, security_returns: Mapping[str, float]) -> float:
    """sum_j R_j(t, t0) X_j(t0)."""
    big_x = spec.value_weights()
    try:
        return total([security_returns[j] * big_x[j] for j in spec.securities])
    except KeyError as exc:
        raise UnknownSecurity(f"missing return for {exc.args[0]!r}") from None
