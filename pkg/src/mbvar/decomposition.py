"""Portfolio quantities broken down by security.

Covers the Markowitz quadratic form of return covariances, the exact
decomposition of the portfolio volume CV squared into per-security volume
CVs and their correlations, its first-order linear counterpart, and the
per-security form of the second-order variance expansion.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, MismatchedLength, WeightSumError
from .moments import ReturnSeries
from .numerics import central_moment2, mean, total
from .variance import TaylorTerms, _check_taylor_args, taylor_terms

# below this product of CVs a volume correlation is undefined and set to 0
BETA_FLOOR = 1e-14
WEIGHT_SUM_TOLERANCE = 1e-12


def _volumes(series) -> np.ndarray:
    return np.asarray(getattr(series, "volumes", series), dtype=float)


def security_volume_cv(series) -> float:
    """chi_j: standard deviation over mean of a security's bucket volumes."""
    u = _volumes(series)
    if u.size < 2:
        raise DegenerateSeries(f"need at least 2 buckets, got {u.size}")
    return math.sqrt(central_moment2(u)) / mean(u)


@dataclass(frozen=True)
class CovarianceMatrix:
    securities: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())


@dataclass(frozen=True)
class VolumeCvDecomposition:
    """Per-security volume CVs, their normalized covariances and correlations.

    ``chi_sq`` is the portfolio volume CV squared rebuilt from the parts;
    it is an exact identity, not an approximation.
    """

    securities: tuple[str, ...]
    chi: np.ndarray
    chi_matrix: np.ndarray
    beta: np.ndarray
    beta_rows: np.ndarray
    weights: np.ndarray
    chi_sq: float

    @property
    def chi_exact(self) -> float:
        return math.sqrt(max(self.chi_sq, 0.0))


def _pairwise(rows: Sequence[np.ndarray], fn) -> np.ndarray:
    """Symmetric matrix fn(i, j) computed once per unordered pair."""
    k = len(rows)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            out[i, j] = out[j, i] = fn(rows[i], rows[j])
    return out


def _ordered(series, weights):
    if isinstance(series, Mapping):
        ids = tuple(series)
        items = [series[j] for j in ids]
    else:
        items = list(series)
        ids = tuple(getattr(s, "security_id", str(k)) for k, s in enumerate(items))
    if isinstance(weights, Mapping):
        w = np.array([weights[j] for j in ids], dtype=float)
    else:
        w = np.asarray(weights, dtype=float)
    if w.size != len(items):
        raise MismatchedLength(f"{len(items)} series but {w.size} weights")
    return ids, items, w


def volume_cv_matrix(series, share_weights) -> VolumeCvDecomposition:
    """Decompose the portfolio volume CV by securities.

    ``share_weights`` are x_j(t0) = U_j(t0) / W_Sigma(t0), as a mapping keyed
    by security id or a sequence in series order.
    """
    ids, items, x = _ordered(series, share_weights)
    vols = [_volumes(s) for s in items]
    if len({v.size for v in vols}) != 1:
        raise MismatchedLength("volume series differ in length")
    if vols[0].size < 2:
        raise DegenerateSeries("need at least 2 buckets")
    means = [mean(v) for v in vols]
    chi = np.array([security_volume_cv(v) for v in vols])
    k = len(vols)
    chi_jk = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            chi_jk[i, j] = chi_jk[j, i] = central_moment2(vols[i], vols[j]) / (means[i] * means[j])
    beta = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                beta[i, j] = 1.0
            elif chi[i] * chi[j] >= BETA_FLOOR:
                beta[i, j] = chi_jk[i, j] / (chi[i] * chi[j])
    chi_sq = math.fsum(
        beta[i, j] * chi[i] * chi[j] * x[i] * x[j] for i in range(k) for j in range(k)
    )
    return VolumeCvDecomposition(ids, chi, chi_jk, beta, beta.sum(axis=1), x, chi_sq)


def chi_linear_decomposition(decomp: VolumeCvDecomposition) -> float:
    """First-order reconstruction sum_j beta_j chi_j x_j of the portfolio volume CV."""
    return math.fsum(b * c * w for b, c, w in zip(decomp.beta_rows, decomp.chi, decomp.weights))


def return_covariance_matrix(returns_by_security) -> CovarianceMatrix:
    """Biased covariances of instant gross returns about their plain means."""
    if isinstance(returns_by_security, Mapping):
        ids = tuple(returns_by_security)
        rows = [returns_by_security[j] for j in ids]
    else:
        rows = list(returns_by_security)
        ids = tuple(str(k) for k in range(len(rows)))
    rows = [np.asarray(r.returns if isinstance(r, ReturnSeries) else r, dtype=float) for r in rows]
    if len({r.size for r in rows}) != 1:
        raise MismatchedLength("return series differ in length")
    if rows[0].size < 2:
        raise DegenerateSeries("need at least 2 returns")
    return CovarianceMatrix(ids, _pairwise(rows, central_moment2))


def markowitz_quadratic_form(cov: CovarianceMatrix, weights) -> float:
    """sum_jk theta_jk X_j X_k, with the value weights X_j(t0) summing to one."""
    if isinstance(weights, Mapping):
        x = np.array([weights[j] for j in cov.securities], dtype=float)
    else:
        x = np.asarray(weights, dtype=float)
    k = cov.matrix.shape[0]
    if x.size != k:
        raise MismatchedLength(f"{k}x{k} covariance but {x.size} weights")
    if abs(total(x) - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise WeightSumError(f"value weights sum to {total(x)!r}, not 1")
    m = cov.matrix
    return math.fsum(m[i, j] * x[i] * x[j] for i in range(k) for j in range(k))


@dataclass(frozen=True)
class TaylorDecomposition:
    terms: TaylorTerms
    chi_linear: float
    chi_sq: float
    return_factor: float
    portfolio_return: float

    @property
    def mu_taylor(self) -> float:
        return self.terms.total

    @property
    def theta(self) -> float:
        return self.terms.total * self.return_factor


def taylor_decomposition(
    psi0: float,
    a: float,
    decomp: VolumeCvDecomposition,
    security_returns,
    value_weights,
) -> TaylorDecomposition:
    """Second-order variance expansion written with per-security quantities.

    ``security_returns`` are average gross returns R_j(t, t0) and
    ``value_weights`` the X_j(t0); both mappings keyed by security or
    sequences in the decomposition's order.
    """
    ids = decomp.securities

    def vec(v):
        if isinstance(v, Mapping):
            return np.array([v[j] for j in ids], dtype=float)
        out = np.asarray(v, dtype=float)
        if out.size != len(ids):
            raise MismatchedLength(f"expected {len(ids)} entries, got {out.size}")
        return out

    r, big_x = vec(security_returns), vec(value_weights)
    chi_lin = chi_linear_decomposition(decomp)
    _check_taylor_args(psi0, a, max(chi_lin, 0.0))
    terms = taylor_terms(psi0, a, chi_lin, decomp.chi_sq)
    k = len(ids)
    factor = math.fsum(r[i] * r[j] * big_x[i] * big_x[j] for i in range(k) for j in range(k))
    port_r = math.fsum(r * big_x)
    return TaylorDecomposition(terms, chi_lin, decomp.chi_sq, factor, port_r)
