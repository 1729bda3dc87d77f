"""The analyze pipeline and its schema-versioned report document.

The report is a plain nested dict. :func:`dumps` serializes it
deterministically: keys keep their construction order and every float is
written with 17 significant digits, so identical inputs give byte-identical
output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregation import build_portfolio
from .decomposition import (
    chi_linear_decomposition,
    markowitz_quadratic_form,
    return_covariance_matrix,
    taylor_decomposition,
    volume_cv_matrix,
)
from .moments import portfolio_return_decomposition, returns, series_vwap, vwap_decomposition_check
from .numerics import relative_difference
from .trades import AveragingWindow, align_to_grid, parse_time, read_portfolio, read_trades, validate_ticks
from .variance import RegimeThresholds, VarianceResult, analyze_series

SCHEMA_VERSION = "1.0"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisInputs:
    """Everything needed to reproduce a report."""

    trades: str
    portfolio: str
    buckets: int
    window_center: float | None = None
    window_width: float | None = None
    lenient: bool = False
    thresholds: RegimeThresholds = RegimeThresholds()

    def to_mapping(self) -> dict:
        return {
            "trades": self.trades,
            "portfolio": self.portfolio,
            "window_center": self.window_center,
            "window_width": self.window_width,
            "buckets": self.buckets,
            "lenient": self.lenient,
            "thresholds": {
                "high_psi0": self.thresholds.high_psi0,
                "low_psi0": self.thresholds.low_psi0,
                "zero_cov": self.thresholds.zero_cov,
            },
        }

    @classmethod
    def from_mapping(cls, doc) -> "AnalysisInputs":
        th = doc.get("thresholds") or {}
        return cls(
            trades=doc["trades"],
            portfolio=doc["portfolio"],
            buckets=int(doc["buckets"]),
            window_center=doc.get("window_center"),
            window_width=doc.get("window_width"),
            lenient=bool(doc.get("lenient", False)),
            thresholds=RegimeThresholds(**th),
        )


def check(**pair) -> dict:
    """Two values that must agree, plus their relative difference."""
    (ka, a), (kb, b) = pair.items()
    return {ka: a, kb: b, "relative_difference": relative_difference(a, b)}


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _variance_block(r: VarianceResult) -> dict:
    m = r.moments
    reg = r.regime
    return {
        "moments": {
            "mean_value": m.mean_value,
            "mean_volume": m.mean_volume,
            "sigma_value": m.sigma_value,
            "sigma_volume": m.sigma_volume,
            "psi": m.value_cv,
            "chi": m.volume_cv,
            "phi": m.phi,
            "cov_value_volume": m.cov_qw,
            "a": m.covariance_coefficient,
            "psi0": m.price_cv_psi0,
            "psi0_squared_exceeds_one": m.psi0_exceeds_one,
        },
        "variance": {
            "price_variance": check(weighted=r.phi, closed_form=r.phi_closed),
            "return_variance": check(weighted=r.theta, closed_form=r.theta_closed),
            "theta": r.theta,
            "theta_markowitz": r.theta_markowitz,
            "mu": r.mu,
            "second_moment_price": r.second_moment_price,
            "taylor": {
                "constant": r.taylor.constant,
                "linear": r.taylor.linear,
                "quadratic": r.taylor.quadratic,
                "mu_taylor": r.mu_taylor,
                "phi_taylor": r.phi_taylor,
                "theta_taylor": r.theta_taylor,
                "theta_taylor_markowitz_form": r.theta_taylor_markowitz_form,
                "valid": r.theta_taylor >= 0 and m.volume_cv <= 1.0,
            },
            "regime": {
                "tag": reg.regime.value,
                "y": reg.y,
                "approx_theta": reg.approx_theta,
                "limit_theta": reg.limit_theta,
                "vanishing_point": reg.vanishing_point,
                "underestimation_ratio": reg.underestimation_ratio,
            },
        },
    }


def _divergence(theta, theta_m) -> dict:
    if theta_m == 0:
        ratio = 1.0 if theta == 0 else math.inf
    else:
        ratio = theta / theta_m
    if relative_difference(theta, theta_m) <= 1e-12:
        direction = "agrees"
    elif theta > theta_m:
        direction = "markowitz_underestimates"
    else:
        direction = "markowitz_overestimates"
    return {"theta": theta, "theta_markowitz": theta_m, "ratio": ratio, "direction": direction}


def _matrix(ids, m) -> dict:
    return {a: {b: float(m[i, j]) for j, b in enumerate(ids)} for i, a in enumerate(ids)}


def analyze(inputs: AnalysisInputs) -> dict:
    """Run the full pipeline and return the report document."""
    spec = read_portfolio(inputs.portfolio)
    ticks = validate_ticks(read_trades(inputs.trades))
    ids = spec.securities
    own = [t for t in ticks if t.security_id in spec.holdings]
    if inputs.window_center is None or inputs.window_width is None:
        window = AveragingWindow.covering([t.time for t in own], inputs.buckets)
    else:
        window = AveragingWindow(float(inputs.window_center), float(inputs.window_width), inputs.buckets)
    alignment = align_to_grid(own, window, ids, strict=not inputs.lenient)
    if alignment.merged_buckets:
        log.warning("merged %d empty buckets; effective N=%d", len(alignment.merged_buckets), alignment.effective_buckets)
    normalized, ps = build_portfolio(alignment, spec)

    s0 = spec.price
    result = analyze_series(ps, s0, inputs.thresholds)

    x = spec.share_weights()
    big_x = spec.value_weights()
    sec_vwap = {j: series_vwap(normalized[j]) for j in ids}
    sec_returns = {j: returns(normalized[j].prices, spec.reference_prices[j], normalized[j].volumes) for j in ids}
    sec_avg_return = {j: sec_returns[j].average for j in ids}
    cov = return_covariance_matrix({j: sec_returns[j] for j in ids})
    quad = markowitz_quadratic_form(cov, big_x)
    vdec = volume_cv_matrix(normalized, x)
    chi_lin = chi_linear_decomposition(vdec)
    a = max(-1.0, min(1.0, result.moments.covariance_coefficient))
    tdec = taylor_decomposition(result.moments.price_cv_psi0, a, vdec, sec_avg_return, big_x)

    securities = {}
    for j in ids:
        rj = analyze_series(alignment[j], spec.reference_prices[j], inputs.thresholds)
        securities[j] = {
            "shares_t0": spec.holdings[j],
            "price_t0": spec.reference_prices[j],
            "share_weight": x[j],
            "value_weight": big_x[j],
            "scale": normalized[j].scale,
            "vwap": sec_vwap[j],
            "gross_return": sec_avg_return[j],
            "normalized_volume_total": check(normalized=normalized[j].total_volume, holding=spec.holdings[j]),
            **_variance_block(rj),
        }

    warnings = list(result.warnings)
    if alignment.merged_buckets:
        warnings.append(f"lenient mode merged {len(alignment.merged_buckets)} empty buckets")

    report = {
        "schema_version": SCHEMA_VERSION,
        "inputs": {
            **inputs.to_mapping(),
            "trades_sha256": _sha256(inputs.trades),
            "portfolio_sha256": _sha256(inputs.portfolio),
        },
        "window": {
            "center": window.center,
            "width": window.width,
            "start": window.start,
            "end": window.end,
            "requested_buckets": alignment.requested_buckets,
            "effective_buckets": alignment.effective_buckets,
            "merged_buckets": list(alignment.merged_buckets),
            "ticks_used": len(own),
        },
        "portfolio": {
            "composition_time": spec.composition_time,
            "securities": list(ids),
            "total_shares": spec.total_shares,
            "total_value_t0": spec.total_value,
            "price_t0": s0,
            "vwap": result.vwap,
            "gross_return": result.gross_return,
            "volume_conservation": check(window_total=ps.total_volume, shares_t0=spec.total_shares),
            "vwap_decomposition": check(
                portfolio_vwap=result.vwap, weighted_security_vwaps=vwap_decomposition_check(spec, sec_vwap)
            ),
            "return_decomposition": check(
                portfolio_return=result.gross_return,
                weighted_security_returns=portfolio_return_decomposition(spec, sec_avg_return),
            ),
        },
        **_variance_block(result),
        "decomposition": {
            "chi_j": {j: float(c) for j, c in zip(ids, vdec.chi)},
            "chi_jk": _matrix(ids, vdec.chi_matrix),
            "beta_jk": _matrix(ids, vdec.beta),
            "beta_j": {j: float(b) for j, b in zip(ids, vdec.beta_rows)},
            "chi_squared": check(reconstructed=vdec.chi_sq, portfolio=result.moments.volume_cv**2),
            "chi_linear": check(linear=chi_lin, exact=result.moments.volume_cv),
            "theta_jk": _matrix(ids, cov.matrix),
            "value_weights": dict(big_x),
            "markowitz_quadratic_form": check(quadratic_form=quad, theta_markowitz=result.theta_markowitz),
            "taylor": {
                "chi_linear": tdec.chi_linear,
                "chi_squared": tdec.chi_sq,
                "mu_taylor": tdec.mu_taylor,
                "theta_taylor": tdec.theta,
                "return_factor": check(quadratic=tdec.return_factor, squared_return=tdec.portfolio_return**2),
            },
        },
        "securities": securities,
        "divergence": _divergence(result.theta, result.theta_markowitz),
        "warnings": warnings,
    }
    return report


def rerun(report: dict) -> dict:
    """Re-run analyze from a report's inputs block."""
    return analyze(AnalysisInputs.from_mapping(report["inputs"]))


# --- serialization ----------------------------------------------------------


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(v, str):
        import json

        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _emit(v, indent, out):
    pad = "  " * indent
    if isinstance(v, dict):
        items = [(k, x) for k, x in v.items() if not str(k).startswith("_")]
        if not items:
            out.append("{}")
            return
        out.append("{\n")
        for n, (k, x) in enumerate(items):
            out.append(f"{pad}  {_scalar(str(k))}: ")
            _emit(x, indent + 1, out)
            out.append(",\n" if n < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(v, (list, tuple)):
        if not v:
            out.append("[]")
            return
        out.append("[\n")
        for n, x in enumerate(v):
            out.append(pad + "  ")
            _emit(x, indent + 1, out)
            out.append(",\n" if n < len(v) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar(v))


def dumps(report: dict) -> str:
    """Deterministic JSON text of a report."""
    out: list[str] = []
    _emit(report, 0, out)
    out.append("\n")
    return "".join(out)


def flatten(doc, prefix="") -> list[tuple[str, object]]:
    rows = []
    if isinstance(doc, dict):
        for k, v in doc.items():
            if str(k).startswith("_"):
                continue
            rows.extend(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(doc, (list, tuple)):
        for i, v in enumerate(doc):
            rows.extend(flatten(v, f"{prefix}[{i}]"))
    else:
        rows.append((prefix, doc))
    return rows


def dumps_csv(report: dict) -> str:
    """The report as a flat two-column ``key,value`` table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, value in flatten(report):
        text = _scalar(value)
        if isinstance(value, str):
            text = value
        w.writerow([key, text])
    return buf.getvalue()


def window_value(raw):
    """Parse a --window-center style value (epoch seconds or ISO-8601)."""
    return None if raw is None else parse_time(raw)
