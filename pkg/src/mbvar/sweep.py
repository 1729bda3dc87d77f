"""Regime sweeps: exact, Markowitz and Taylor variances over a grid of volume CVs."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .aggregation import build_portfolio
from .synthetic import _PRESET, generate, generate_regime
from .variance import analyze_series


@dataclass(frozen=True)
class SweepRow:
    chi_target: float
    psi0: float
    chi: float
    a: float
    gross_return: float
    theta_exact: float
    theta_markowitz: float
    theta_taylor: float
    ratio: float
    taylor_ratio: float


def _ratio(x, y):
    return x / y if y != 0 else float("nan")


def sweep(regime, chi_grid, *, a=_PRESET, psi0=None, buckets=10_000, seed=0, securities=1) -> list[SweepRow]:
    """One synthetic portfolio per grid point, analyzed end to end.

    ``a`` and ``psi0`` override the regime preset; ``a=None`` leaves the
    value/volume coefficient unconstrained.
    """
    rows = []
    for chi in chi_grid:
        spec = generate_regime(regime, chi=float(chi), a=a, psi0=psi0, buckets=buckets, seed=seed, securities=securities)
        sample = generate(spec)
        _, ps = build_portfolio(sample.series, sample.portfolio)
        r = analyze_series(ps, sample.portfolio.price)
        m = r.moments
        rows.append(
            SweepRow(
                chi_target=float(chi),
                psi0=m.price_cv_psi0,
                chi=m.volume_cv,
                a=m.covariance_coefficient,
                gross_return=r.gross_return,
                theta_exact=r.theta,
                theta_markowitz=r.theta_markowitz,
                theta_taylor=r.theta_taylor,
                ratio=_ratio(r.theta, r.theta_markowitz),
                taylor_ratio=_ratio(r.theta_taylor, r.theta_markowitz),
            )
        )
    return rows


def write_sweep_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(SweepRow)])
        for row in rows:
            w.writerow([format(v, ".17g") for v in astuple(row)])


def zero_crossing(xs, ys) -> float | None:
    """First x where the piecewise-linear interpolant of ys changes sign."""
    pts = list(zip(xs, ys))
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 == 0:
            return float(x0)
        if (y0 < 0) != (y1 < 0):
            return float(x0 + (x1 - x0) * y0 / (y0 - y1))
    if pts and pts[-1][1] == 0:
        return float(pts[-1][0])
    return None
