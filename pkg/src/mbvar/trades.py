"""Raw trades, the averaging window, portfolio composition and grid alignment.

Real trades arrive asynchronously, while the variance formulas assume every
security trades once per grid step.  :func:`align_to_grid` bridges the two by
summing trade values and volumes inside each of the N equal sub-intervals of
the window, so the implied bucket price is the bucket VWAP and all window
totals are preserved.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import MappingProxyType

import numpy as np
import yaml

from .errors import (
    DegenerateSeries,
    EmptyBucket,
    MismatchedLength,
    NonPositiveField,
    ParseError,
    UnsortedInput,
)
from .numerics import frozen, total


@dataclass(frozen=True)
class TradeTick:
    """One market trade. Price is derived as ``value / volume``."""

    time: float
    security_id: str
    value: float
    volume: float

    @property
    def price(self) -> float:
        return self.value / self.volume


@dataclass(frozen=True)
class AveragingWindow:
    """The interval ``[center - width/2, center + width/2]`` cut into ``buckets`` steps."""

    center: float
    width: float
    buckets: int

    def __post_init__(self):
        if self.buckets < 2:
            raise DegenerateSeries(f"bucket count must be >= 2, got {self.buckets}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"window width must be positive, got {self.width}")

    @classmethod
    def covering(cls, times, buckets: int) -> "AveragingWindow":
        """Window spanning exactly from the first to the last tick time."""
        lo, hi = float(np.min(times)), float(np.max(times))
        if hi <= lo:
            raise DegenerateSeries("all ticks share one timestamp; give an explicit window")
        return cls(center=(lo + hi) / 2.0, width=hi - lo, buckets=buckets)

    @property
    def half_width(self) -> float:
        return self.width / 2.0

    @property
    def start(self) -> float:
        return self.center - self.half_width

    @property
    def end(self) -> float:
        return self.center + self.half_width

    @property
    def bucket_width(self) -> float:
        return self.width / self.buckets

    def edges(self) -> np.ndarray:
        return self.start + self.width * np.arange(self.buckets + 1) / self.buckets


@dataclass(frozen=True)
class PortfolioSpec:
    """Holdings and reference prices fixed at composition time t0.

    Security order is the insertion order of ``holdings`` and is used for
    every cross-security reduction downstream.
    """

    composition_time: float
    holdings: Mapping[str, float]
    reference_prices: Mapping[str, float]

    def __post_init__(self):
        holdings = {str(k): float(v) for k, v in self.holdings.items()}
        prices = {str(k): float(v) for k, v in self.reference_prices.items()}
        if not holdings:
            raise ValueError("portfolio must hold at least one security")
        if set(holdings) != set(prices):
            missing = sorted(set(holdings) ^ set(prices))
            raise ParseError(f"holdings and reference prices disagree on securities: {missing}")
        for sid in holdings:
            if not (holdings[sid] > 0 and math.isfinite(holdings[sid])):
                raise NonPositiveField(f"holding of {sid!r} must be > 0, got {holdings[sid]}")
            if not (prices[sid] > 0 and math.isfinite(prices[sid])):
                raise NonPositiveField(f"reference price of {sid!r} must be > 0, got {prices[sid]}")
        object.__setattr__(self, "holdings", MappingProxyType(holdings))
        object.__setattr__(self, "reference_prices", MappingProxyType({k: prices[k] for k in holdings}))

    @property
    def securities(self) -> tuple[str, ...]:
        return tuple(self.holdings)

    @property
    def total_shares(self) -> float:
        """W_Sigma(t0)."""
        return total(list(self.holdings.values()))

    @property
    def total_value(self) -> float:
        """Q_Sigma(t0)."""
        return total([self.holdings[j] * self.reference_prices[j] for j in self.holdings])

    @property
    def price(self) -> float:
        """Portfolio price per share s(t0) = Q_Sigma(t0) / W_Sigma(t0)."""
        return self.total_value / self.total_shares

    def share_weights(self) -> dict[str, float]:
        """x_j(t0): fraction of portfolio shares held in each security."""
        w = self.total_shares
        return {j: u / w for j, u in self.holdings.items()}

    def value_weights(self) -> dict[str, float]:
        """X_j(t0): fraction of portfolio value invested in each security."""
        q = self.total_value
        return {j: self.holdings[j] * self.reference_prices[j] / q for j in self.holdings}


@dataclass(frozen=True)
class AlignedSeries:
    """Per-bucket total value and volume of one security."""

    security_id: str
    values: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        values, volumes = frozen(self.values), frozen(self.volumes)
        if values.shape != volumes.shape or values.ndim != 1:
            raise MismatchedLength("values and volumes must be 1-D arrays of equal length")
        if not (np.all(values > 0) and np.all(volumes > 0)):
            raise NonPositiveField(f"series {self.security_id!r} has non-positive buckets")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "volumes", volumes)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def prices(self) -> np.ndarray:
        return self.values / self.volumes

    @property
    def buckets(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.volumes.tolist()))


@dataclass(frozen=True)
class Alignment(Mapping):
    """Result of :func:`align_to_grid`: series per security plus grid metadata."""

    series: Mapping[str, AlignedSeries]
    window: AveragingWindow
    edges: np.ndarray
    merged_buckets: tuple[int, ...] = field(default=())

    def __getitem__(self, key):
        return self.series[key]

    def __iter__(self):
        return iter(self.series)

    def __len__(self):
        return len(self.series)

    @property
    def requested_buckets(self) -> int:
        return self.window.buckets

    @property
    def effective_buckets(self) -> int:
        return len(self.edges) - 1


def validate_ticks(ticks: Iterable[TradeTick], *, sort: bool = True, strict_order: bool = False):
    """Check every tick and return them as a list ordered by time.

    ``strict_order`` turns an out-of-order stream into :class:`UnsortedInput`
    instead of silently reordering it.
    """
    out = []
    last = -math.inf
    for k, tick in enumerate(ticks):
        for name in ("value", "volume"):
            x = getattr(tick, name)
            if not (x > 0 and math.isfinite(x)):
                raise NonPositiveField(f"tick {k} ({tick.security_id!r} at t={tick.time}): {name}={x}")
        if not math.isfinite(tick.time):
            raise ParseError(f"tick {k}: non-finite time {tick.time}")
        if strict_order and tick.time < last:
            raise UnsortedInput(f"tick {k} at t={tick.time} precedes t={last}")
        last = max(last, tick.time)
        out.append(tick)
    if sort:
        out.sort(key=lambda t: t.time)
    return out


def align_to_grid(ticks, window: AveragingWindow, securities=None, *, strict: bool = True) -> Alignment:
    """Sum trades of each security into the window's equal buckets.

    Bucket i covers ``[start + i*eps, start + (i+1)*eps)``; the last bucket is
    closed on the right. Ticks outside the window are ignored.

    In strict mode a security without trades in some bucket raises
    :class:`EmptyBucket`. In lenient mode such a bucket is merged into its left
    neighbour (the first bucket into its right neighbour) for *all* securities,
    so the grid stays shared and the effective bucket count drops.
    """
    ticks = list(ticks)
    if securities is None:
        securities = sorted({t.security_id for t in ticks})
    securities = list(securities)
    n = window.buckets
    edges = window.edges()

    times = np.array([t.time for t in ticks], dtype=float)
    idx = np.searchsorted(edges, times, side="right") - 1
    idx[times == edges[-1]] = n - 1
    inside = (idx >= 0) & (idx < n)

    # cells[j][i] holds the (values, volumes) of security j in bucket i
    position = {sid: j for j, sid in enumerate(securities)}
    cells = [[([], []) for _ in range(n)] for _ in securities]
    for tick, i, ok in zip(ticks, idx.tolist(), inside.tolist()):
        j = position.get(tick.security_id)
        if ok and j is not None:
            cells[j][i][0].append(tick.value)
            cells[j][i][1].append(tick.volume)

    counts = np.array([[len(c[1]) for c in row] for row in cells], dtype=int).reshape(len(securities), n)
    groups = [[i] for i in range(n)]
    merged = []
    if np.any(counts == 0):
        if strict:
            j, i = np.argwhere(counts == 0)[0]
            raise EmptyBucket(securities[j], int(i))
        groups = []
        for i in range(n):
            if groups and np.any(counts[:, i] == 0):
                groups[-1].append(i)
                merged.append(i)
            else:
                groups.append([i])
        while len(groups) > 1 and np.any(counts[:, groups[0]].sum(axis=1) == 0):
            merged.append(groups[0][-1])
            groups[1] = groups[0] + groups[1]
            groups.pop(0)
        if np.any(counts[:, groups[0]].sum(axis=1) == 0):
            j = int(np.argwhere(counts[:, groups[0]].sum(axis=1) == 0)[0][0])
            raise EmptyBucket(securities[j], groups[0][0])
        if len(groups) < 2:
            raise DegenerateSeries("lenient merging left fewer than 2 buckets")

    series = {}
    for j, sid in enumerate(securities):
        values = [math.fsum(v for i in g for v in cells[j][i][0]) for g in groups]
        volumes = [math.fsum(u for i in g for u in cells[j][i][1]) for g in groups]
        series[sid] = AlignedSeries(sid, np.array(values), np.array(volumes))

    new_edges = frozen([edges[g[0]] for g in groups] + [edges[-1]])
    return Alignment(MappingProxyType(series), window, new_edges, tuple(sorted(merged)))


# --- file formats -----------------------------------------------------------


def parse_time(raw) -> float:
    """Epoch seconds from a number, numeric string or ISO-8601 string."""
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    text = str(raw).strip()
    try:
        return float(text)
    except ValueError:
        pass
    return _parse_iso(text)


def _parse_iso(text: str) -> float:
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"unrecognised timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _is_epoch(raw) -> bool:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return True
    try:
        float(str(raw))
    except ValueError:
        return False
    return True


def _times(raw_times, source) -> list[float]:
    kinds = {_is_epoch(r) for r in raw_times}
    if len(kinds) > 1:
        raise ParseError(f"{source}: mixed epoch and ISO-8601 timestamps")
    if kinds == {True}:
        return [float(r) for r in raw_times]
    return [_parse_iso(str(r).strip()) for r in raw_times]


def _number(raw, what, line, source) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}:{line}: bad {what} {raw!r}") from exc


def _ticks_from_records(records, source) -> list[TradeTick]:
    if not records:
        return []
    keys = set(records[0][1])
    if "value" in keys:
        mode = "value"
    elif "price" in keys:
        mode = "price"
    else:
        raise ParseError(f"{source}: need a 'value' or 'price' column")
    for need in ("time", "security", "volume"):
        if need not in keys:
            raise ParseError(f"{source}: missing column {need!r}")

    times = _times([rec["time"] for _, rec in records], source)
    ticks = []
    for (line, rec), t in zip(records, times):
        if mode not in rec:
            raise ParseError(f"{source}:{line}: missing {mode!r}")
        volume = _number(rec["volume"], "volume", line, source)
        amount = _number(rec[mode], mode, line, source)
        value = amount * volume if mode == "price" else amount
        ticks.append(TradeTick(t, str(rec["security"]).strip(), value, volume))
    return ticks


def read_trades(path) -> list[TradeTick]:
    """Read ticks from CSV (header required) or JSON Lines (``.jsonl``/``.ndjson``).

    Accepted columns: ``time,security,value,volume`` or ``time,security,price,volume``.
    A price-quoted file is converted with ``value = price * volume``.
    """
    path = Path(path)
    source = str(path)
    text = path.read_text()
    records = []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for line, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{source}:{line}: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise ParseError(f"{source}:{line}: expected a JSON object")
            records.append((line, rec))
    else:
        reader = csv.DictReader(text.splitlines())
        if reader.fieldnames is None:
            raise ParseError(f"{source}: empty file")
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        for line, rec in enumerate(reader, start=2):
            records.append((line, rec))
    return _ticks_from_records(records, source)


def write_trades(ticks, path) -> None:
    """Write ticks as ``time,security,value,volume`` CSV with round-trip float text."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "security", "value", "volume"])
        for t in ticks:
            w.writerow([repr(float(t.time)), t.security_id, repr(float(t.value)), repr(float(t.volume))])


def read_portfolio(path) -> PortfolioSpec:
    """Load a portfolio file.

    YAML (or JSON) of the form::

        composition_time: 0          # epoch seconds or ISO-8601
        securities:
          - {id: A, shares: 100, price: 2.0}
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "securities" not in doc:
        raise ParseError(f"{path}: expected a mapping with a 'securities' list")
    holdings, prices = {}, {}
    for k, row in enumerate(doc["securities"]):
        try:
            sid = str(row["id"])
            shares, price = float(row["shares"]), float(row["price"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: security entry {k} needs id, shares, price") from exc
        if sid in holdings:
            raise ParseError(f"{path}: duplicate security {sid!r}")
        holdings[sid], prices[sid] = shares, price
    t0 = doc.get("composition_time", 0.0)
    return PortfolioSpec(parse_time(t0), holdings, prices)


def write_portfolio(spec: PortfolioSpec, path) -> None:
    doc = {
        "composition_time": float(spec.composition_time),
        "securities": [
            {"id": j, "shares": float(spec.holdings[j]), "price": float(spec.reference_prices[j])}
            for j in spec.securities
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
