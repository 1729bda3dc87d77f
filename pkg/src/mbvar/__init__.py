"""Market-based portfolio variance from trade series.

Trades of each held security are rescaled to the held share count and summed
into one portfolio trade series. Its volume-weighted price variance is then
compared with the classical Markowitz variance of returns.
"""

from .aggregation import NormalizedSeries, PortfolioSeries, build_portfolio, normalize_series, portfolio_series
from .decomposition import (
    markowitz_quadratic_form,
    return_covariance_matrix,
    taylor_decomposition,
    volume_cv_matrix,
)
from .errors import MbvarError
from .moments import MomentSet, moment_set, returns, vwap
from .report import AnalysisInputs, analyze, dumps
from .synthetic import GeneratorSpec, generate, generate_regime
from .trades import AlignedSeries, AveragingWindow, PortfolioSpec, TradeTick, align_to_grid, read_portfolio, read_trades
from .variance import Regime, analyze_series, markowitz_variance, taylor_mu, weighted_price_variance

__all__ = [
    "AlignedSeries",
    "AnalysisInputs",
    "AveragingWindow",
    "GeneratorSpec",
    "MbvarError",
    "MomentSet",
    "NormalizedSeries",
    "PortfolioSeries",
    "PortfolioSpec",
    "Regime",
    "TradeTick",
    "align_to_grid",
    "analyze",
    "analyze_series",
    "build_portfolio",
    "dumps",
    "generate",
    "generate_regime",
    "markowitz_quadratic_form",
    "markowitz_variance",
    "moment_set",
    "normalize_series",
    "portfolio_series",
    "read_portfolio",
    "read_trades",
    "return_covariance_matrix",
    "returns",
    "taylor_decomposition",
    "taylor_mu",
    "volume_cv_matrix",
    "vwap",
    "weighted_price_variance",
]
