"""Turn per-security trade series into one synthetic portfolio trade series.

Each security's market trades are rescaled by ``lambda_j = U_j(t0) / U_Sigma_j``
so that, over the window, its scaled volumes add up to exactly the shares the
portfolio holds. Bucketwise sums of the scaled series are then trades "in the
portfolio" with value Q, volume W and price s = Q / W.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import MismatchedLength, NonPositiveField, UnknownSecurity, ZeroTotalVolume
from .numerics import frozen, rowwise_sum, total
from .trades import AlignedSeries, PortfolioSpec


def normalization_scale(holding: float, total_traded: float) -> float:
    """lambda_j = U_j(t0) / U_Sigma_j(t)."""
    if total_traded == 0:
        raise ZeroTotalVolume("security did not trade in the window")
    if holding <= 0 or total_traded < 0:
        raise NonPositiveField(f"holding={holding}, total traded={total_traded}")
    return holding / total_traded


@dataclass(frozen=True)
class NormalizedSeries:
    """Trades of one security rescaled to the portfolio holding."""

    security_id: str
    scale: float
    values: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", frozen(self.values))
        object.__setattr__(self, "volumes", frozen(self.volumes))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def prices(self) -> np.ndarray:
        return self.values / self.volumes

    @property
    def total_volume(self) -> float:
        return total(self.volumes)

    @property
    def total_value(self) -> float:
        return total(self.values)


@dataclass(frozen=True)
class PortfolioSeries:
    """Bucketwise value Q(t_i) and volume W(t_i) of trades in the portfolio."""

    values: np.ndarray
    volumes: np.ndarray
    reference: PortfolioSpec

    def __post_init__(self):
        values, volumes = frozen(self.values), frozen(self.volumes)
        if values.shape != volumes.shape:
            raise MismatchedLength("values and volumes differ in length")
        if not (np.all(volumes > 0) and np.all(values > 0)):
            raise NonPositiveField("portfolio series must have positive values and volumes")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "volumes", volumes)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def prices(self) -> np.ndarray:
        """s(t_i) = Q(t_i) / W(t_i)."""
        return self.values / self.volumes

    @property
    def total_volume(self) -> float:
        """W_Sigma(t); equals the portfolio share count W_Sigma(t0)."""
        return total(self.volumes)

    @property
    def total_value(self) -> float:
        return total(self.values)

    @property
    def buckets(self) -> list[tuple[float, float, float]]:
        return list(zip(self.values.tolist(), self.volumes.tolist(), self.prices.tolist()))


def normalize_series(series: AlignedSeries, spec: PortfolioSpec) -> NormalizedSeries:
    try:
        holding = spec.holdings[series.security_id]
    except KeyError:
        raise UnknownSecurity(f"{series.security_id!r} is not in the portfolio") from None
    lam = normalization_scale(holding, total(series.volumes))
    return NormalizedSeries(series.security_id, lam, lam * series.values, lam * series.volumes)


def portfolio_series(normalized: Sequence[NormalizedSeries], spec: PortfolioSpec) -> PortfolioSeries:
    """Bucketwise sums over securities, taken in the portfolio's security order."""
    by_id = {s.security_id: s for s in normalized}
    for sid in by_id:
        if sid not in spec.holdings:
            raise UnknownSecurity(f"{sid!r} is not in the portfolio")
    missing = [sid for sid in spec.securities if sid not in by_id]
    if missing:
        raise UnknownSecurity(f"no series for portfolio securities {missing}")
    ordered = [by_id[sid] for sid in spec.securities]
    lengths = {s.n for s in ordered}
    if len(lengths) != 1:
        raise MismatchedLength(f"series lengths differ: {sorted(lengths)}")
    q = rowwise_sum(s.values for s in ordered)
    w = rowwise_sum(s.volumes for s in ordered)
    return PortfolioSeries(q, w, spec)


def portfolio_price_t0(spec: PortfolioSpec) -> float:
    """s(t0) = Q_Sigma(t0) / W_Sigma(t0) = sum_j p_j(t0) x_j(t0)."""
    return spec.price


def build_portfolio(series, spec: PortfolioSpec):
    """Normalize every aligned series of the portfolio and aggregate them.

    ``series`` is a mapping (or sequence) of :class:`AlignedSeries`. Returns
    ``(normalized_by_id, portfolio_series)``.
    """
    items = series.values() if isinstance(series, Mapping) else series
    by_id = {s.security_id: s for s in items}
    normalized = {}
    for sid in spec.securities:
        if sid not in by_id:
            raise UnknownSecurity(f"no trades for portfolio security {sid!r}")
        normalized[sid] = normalize_series(by_id[sid], spec)
    return normalized, portfolio_series(list(normalized.values()), spec)
