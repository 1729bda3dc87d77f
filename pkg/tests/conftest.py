from __future__ import annotations

import re
from pathlib import Path

import numpy as np
import pytest

from mbvar.trades import AlignedSeries, PortfolioSpec

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


def random_portfolio(rng: np.random.Generator, securities: int, buckets: int, *,
                     constant_volume: bool = False, zero_cv: tuple[int, ...] = ()):
    """Random positive aligned series plus a matching portfolio composition."""
    series = {}
    holdings, prices = {}, {}
    for j in range(securities):
        sid = f"X{j}"
        level = float(np.exp(rng.uniform(-3, 5)))
        p = level * np.exp(rng.normal(0.0, rng.uniform(0.0, 0.8), buckets))
        if constant_volume or j in zero_cv:
            u = np.full(buckets, float(np.exp(rng.uniform(-2, 8))))
        else:
            u = np.exp(rng.normal(rng.uniform(-2, 8), rng.uniform(0.0, 1.2), buckets))
        series[sid] = AlignedSeries(sid, p * u, u)
        holdings[sid] = float(np.exp(rng.uniform(0, 10)))
        prices[sid] = level * float(np.exp(rng.normal(0.0, 0.3)))
    return series, PortfolioSpec(0.0, holdings, prices)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
