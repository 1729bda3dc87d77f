"""Deterministic synthetic trade series with prescribed moments.

Generation happens at the portfolio level first and is then split across
securities so that the split leaves the portfolio series untouched:

1. Portfolio volumes W and prices s are affine-corrected log-normal paths.
   A log-normal draw ``Y`` is standardized in-sample and mapped to
   ``base * (1 + cv * (Y - mean Y) / std Y)``, which hits the requested
   coefficient of variation exactly and stays positive as long as the
   draw's own sample CV exceeds the target (hence the tail factors > 1).
2. Prices are tied to volumes by mixing the underlying Gaussians with a
   coefficient ``rho``. When a value/volume covariance coefficient ``a`` is
   requested, ``rho`` is found by a grid scan for a sign change followed by
   bisection on the measured ``a`` of the full sample. The relationship is
   not monotone, and some targets need heavier tails, so a short ladder of
   tail shapes is tried in order.
3. Each bucket's volume is shared among securities with softmax weights,
   and security prices are scaled by factors whose share-weighted mean is
   one, so sum_j p_j U_j = s W bucket by bucket.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InfeasibleTargets
from .moments import moments_from_arrays
from .numerics import total
from .trades import AlignedSeries, AveragingWindow, PortfolioSpec, TradeTick

# (volume tail factor, price tail factor): draw CV = target CV * factor
TAIL_LADDER = ((1.3, 1.3), (1.3, 1.05), (2.0, 1.3), (2.0, 1.05), (3.0, 1.05), (3.0, 1.01), (5.0, 1.01), (8.0, 1.01))
RHO_GRID = np.linspace(-1.0, 1.0, 81)
A_MATCH_TOLERANCE = 1e-13


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    securities: int = 1
    buckets: int = 1000
    target_price_cv: float = 0.1
    target_volume_cv: float = 0.3
    target_corr_a: float | None = None
    volume_corr_matrix: tuple[tuple[float, ...], ...] | None = None
    base_price: float = 100.0
    base_volume: float = 1000.0
    gross_return: float = 1.0
    share_dispersion: float = 0.25
    price_dispersion: float = 0.05
    start_time: float = 0.0
    bucket_width: float = 1.0

    def __post_init__(self):
        if self.securities < 1:
            raise ValueError("need at least one security")
        if self.buckets < 2:
            raise ValueError("need at least two buckets")
        if not 0.0 <= self.target_price_cv <= 1.5:
            raise ValueError(f"target price CV must lie in [0, 1.5], got {self.target_price_cv}")
        if not 0.0 <= self.target_volume_cv <= 1.0:
            raise ValueError(f"target volume CV must lie in [0, 1], got {self.target_volume_cv}")
        if self.target_corr_a is not None and not -1.0 <= self.target_corr_a <= 1.0:
            raise ValueError(f"target a must lie in [-1, 1], got {self.target_corr_a}")
        if min(self.base_price, self.base_volume, self.gross_return, self.bucket_width) <= 0:
            raise ValueError("scales must be positive")
        if self.volume_corr_matrix is not None:
            m = tuple(tuple(float(v) for v in row) for row in self.volume_corr_matrix)
            if len(m) != self.securities or any(len(row) != self.securities for row in m):
                raise ValueError("volume_corr_matrix must be securities x securities")
            object.__setattr__(self, "volume_corr_matrix", m)

    @classmethod
    def from_mapping(cls, doc) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**doc)

    def to_mapping(self) -> dict:
        doc = asdict(self)
        if doc["volume_corr_matrix"] is not None:
            doc["volume_corr_matrix"] = [list(r) for r in doc["volume_corr_matrix"]]
        return doc


@dataclass(frozen=True)
class GeneratedSample:
    spec: GeneratorSpec
    series: dict[str, AlignedSeries]
    portfolio: PortfolioSpec
    mixing: float
    tails: tuple[float, float]
    portfolio_prices: np.ndarray = field(repr=False)
    portfolio_volumes: np.ndarray = field(repr=False)

    @property
    def window(self) -> AveragingWindow:
        width = self.spec.buckets * self.spec.bucket_width
        return AveragingWindow(self.spec.start_time + width / 2.0, width, self.spec.buckets)

    def ticks(self) -> list[TradeTick]:
        """One trade per security per bucket, stamped at the bucket midpoint."""
        sp = self.spec
        times = sp.start_time + (np.arange(sp.buckets) + 0.5) * sp.bucket_width
        out = []
        for i, t in enumerate(times.tolist()):
            for sid, s in self.series.items():
                out.append(TradeTick(t, sid, float(s.values[i]), float(s.volumes[i])))
        return out


def _affine_lognormal(z, cv, tail, base):
    """base * (1 + cv * standardized(exp(sigma z))); None if any entry is <= 0."""
    if cv == 0.0:
        return np.full(z.size, float(base))
    sigma = math.sqrt(math.log1p((cv * tail) ** 2))
    y = np.exp(sigma * z)
    m = total(y) / y.size
    sd = math.sqrt(total((y - m) ** 2) / y.size)
    path = base * (1.0 + cv * (y - m) / sd)
    if not np.all(path > 0):
        return None
    return path


def _measured_a(prices, volumes):
    return moments_from_arrays(prices * volumes, volumes).covariance_coefficient


def _mix(z_vol, z_price, rho):
    return rho * z_vol + math.sqrt(max(0.0, 1.0 - rho * rho)) * z_price


def _match_a(z_vol, z_price, w, psi0, tail_p, base, target):
    """Bisect the mixing coefficient so the sample's measured a equals target."""

    def gap(rho):
        s = _affine_lognormal(_mix(z_vol, z_price, rho), psi0, tail_p, base)
        if s is None:
            return None, None
        return _measured_a(s, w) - target, s

    seen = []
    prev = None
    for rho in RHO_GRID:
        d, s = gap(float(rho))
        if d is None:
            prev = None
            continue
        seen.append(d + target)
        if d == 0.0:
            return float(rho), s, seen
        if prev is not None and (prev[1] < 0) != (d < 0):
            lo, d_lo = prev
            hi = float(rho)
            best = (float(rho), d, s)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                dm, sm = gap(mid)
                if dm is None:
                    break
                if abs(dm) < abs(best[1]):
                    best = (mid, dm, sm)
                if abs(dm) <= A_MATCH_TOLERANCE:
                    break
                if (dm < 0) == (d_lo < 0):
                    lo, d_lo = mid, dm
                else:
                    hi = mid
            if abs(best[1]) <= 1e-9:
                return best[0], best[2], seen
        prev = (float(rho), d)
    return None, None, seen


def _portfolio_paths(spec: GeneratorSpec, z_vol, z_price):
    psi0, chi, target = spec.target_price_cv, spec.target_volume_cv, spec.target_corr_a
    seen = []
    for tail_v, tail_p in TAIL_LADDER:
        w = _affine_lognormal(z_vol, chi, tail_v, spec.base_volume)
        if w is None:
            continue
        if target is None or chi == 0.0:
            s = _affine_lognormal(z_price, psi0, tail_p, spec.base_price)
            if s is not None:
                return w, s, 0.0, (tail_v, tail_p)
            continue
        if psi0 == 0.0:
            s = np.full(w.size, spec.base_price)
            got = _measured_a(s, w)
            if abs(got - target) <= 1e-9:
                return w, s, 0.0, (tail_v, tail_p)
            raise InfeasibleTargets(f"constant prices force a={got:.6g}; requested {target}")
        rho, s, scanned = _match_a(z_vol, z_price, w, psi0, tail_p, spec.base_price, target)
        seen.extend(scanned)
        if rho is not None:
            return w, s, rho, (tail_v, tail_p)
    if seen:
        raise InfeasibleTargets(
            f"a={target} unreachable for price CV {psi0} and volume CV {chi}; "
            f"scanned a in [{min(seen):.4g}, {max(seen):.4g}]"
        )
    raise InfeasibleTargets(f"no positive path for price CV {psi0} and volume CV {chi}")


def generate(spec: GeneratorSpec) -> GeneratedSample:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n, k = spec.buckets, spec.securities
    z_vol = rng.standard_normal(n)
    z_price = rng.standard_normal(n)
    z_share = rng.standard_normal((k, n))
    z_sec_price = rng.standard_normal((k, n))
    z_level = rng.standard_normal(k)

    w, s, rho, tails = _portfolio_paths(spec, z_vol, z_price)

    if k == 1:
        volumes = w[None, :]
        prices = s[None, :]
    else:
        if spec.volume_corr_matrix is not None:
            try:
                chol = np.linalg.cholesky(np.array(spec.volume_corr_matrix))
            except np.linalg.LinAlgError as exc:
                raise InfeasibleTargets("volume_corr_matrix is not positive definite") from exc
            eta = chol @ z_share
        else:
            eta = z_share
        eta = spec.share_dispersion * eta
        shares = np.exp(eta - eta.max(axis=0))
        shares /= shares.sum(axis=0)
        volumes = w[None, :] * shares
        raw = np.exp(0.5 * z_level)[:, None] * np.exp(spec.price_dispersion * z_sec_price)
        prices = s[None, :] * raw / (shares * raw).sum(axis=0)

    ids = [f"S{j + 1:02d}" for j in range(k)] if k > 1 else ["S01"]
    series = {}
    holdings, ref_prices = {}, {}
    for j, sid in enumerate(ids):
        vol = volumes[j]
        val = prices[j] * vol
        series[sid] = AlignedSeries(sid, val, vol)
        holdings[sid] = total(vol)
        ref_prices[sid] = (total(val) / total(vol)) / spec.gross_return
    portfolio = PortfolioSpec(spec.start_time, holdings, ref_prices)
    return GeneratedSample(spec, series, portfolio, rho, tails, s, w)


class RegimePreset(str, enum.Enum):
    HIGH_PSI0 = "HIGH_PSI0"
    LOW_PSI0 = "LOW_PSI0"
    ZERO_COV = "ZERO_COV"


# price CV and value/volume coefficient a per regime; None leaves a free
PRESETS = {
    RegimePreset.HIGH_PSI0: (0.95, 0.6),
    RegimePreset.LOW_PSI0: (0.03, None),
    RegimePreset.ZERO_COV: (0.8, 0.0),
}

_PRESET = object()


def generate_regime(
    regime,
    *,
    chi: float = 0.5,
    a=_PRESET,
    psi0: float | None = None,
    buckets: int = 10_000,
    seed: int = 0,
    securities: int = 1,
) -> GeneratorSpec:
    """GeneratorSpec for one of the limiting cases, with optional knob overrides."""
    regime = RegimePreset(regime)
    preset_psi0, preset_a = PRESETS[regime]
    return GeneratorSpec(
        seed=seed,
        securities=securities,
        buckets=buckets,
        target_price_cv=preset_psi0 if psi0 is None else psi0,
        target_volume_cv=chi,
        target_corr_a=preset_a if a is _PRESET else a,
    )


def controlled_family(psi: float, chi: float, a: float, buckets: int = 400,
                      base_value: float = 100.0, base_volume: float = 10.0) -> AlignedSeries:
    """Series whose value CV, volume CV and coefficient a are exactly as given.

    Built from two orthogonal +-1 patterns, so ``buckets`` must be a multiple
    of 4. Requires chi < 1 and psi * (|a| + sqrt(1 - a**2)) < 1 for positivity.
    """
    if buckets % 4:
        raise ValueError("buckets must be a multiple of 4")
    if not (0 <= chi < 1 and psi >= 0 and abs(a) <= 1):
        raise ValueError("need 0 <= chi < 1, psi >= 0, |a| <= 1")
    if psi * (abs(a) + math.sqrt(1 - a * a)) >= 1:
        raise ValueError("psi too large for positive values")
    reps = buckets // 4
    h1 = np.tile([1.0, 1.0, -1.0, -1.0], reps)
    h2 = np.tile([1.0, -1.0, 1.0, -1.0], reps)
    volumes = base_volume * (1.0 + chi * h1)
    values = base_value * (1.0 + psi * (a * h1 + math.sqrt(1 - a * a) * h2))
    return AlignedSeries("F", values, volumes)
