"""Daily sentiment factor: aggregation, ranking, carry-forward and group assignment."""

from __future__ import annotations
import csv
import datetime as dt
import logging
import math
import pathlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import pandas as pd

from .errors import MalformedStockId, MissingFactor, MixedProviders, RowErrors, RowIssue, SchemaError, TooFewStocks
from .ingest import read_csv_table
from .model import NewsRecord, ProviderKind, Scale, StockId, TradingCalendar, parse_stock_id
from .sentiment.scores import SentimentScore, signed_value

log = logging.getLogger(__name__)

PANEL_COLUMNS = ("stock_id", "date", "factor_value", "provider_kind", "scale")


@dataclass(frozen=True)
class FactorPanel:
    values: Mapping[Tuple[StockId, dt.date], float]
    provider: Optional[ProviderKind]
    scale: Scale = Scale.SIGNED
    _by_date: Dict[dt.date, Dict[StockId, float]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))
        lo, hi = (-1.0, 1.0) if self.scale is Scale.SIGNED else (0.0, 1.0)
        by_date: Dict[dt.date, Dict[StockId, float]] = defaultdict(dict)
        for (stock, d), v in sorted(self.values.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            if not math.isfinite(v) or not lo <= v <= hi:
                raise ValueError(f"factor for {stock} on {d} is {v!r}, outside the {self.scale.value} scale")
            by_date[d][stock] = v
        object.__setattr__(self, "_by_date", dict(by_date))

    @property
    def coverage(self) -> Dict[dt.date, int]:
        return {d: len(vals) for d, vals in self._by_date.items()}

    def dates(self) -> List[dt.date]:
        return sorted(self._by_date)

    def on(self, d: dt.date) -> Dict[StockId, float]:
        return self._by_date.get(d, {})

    def get(self, stock: StockId, d: dt.date) -> Optional[float]:
        return self.values.get((stock, d))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DailyRanking:
    """Stocks with a factor on ``date``, best first. Ties go to the smaller stock id."""

    date: dt.date
    entries: Tuple[Tuple[StockId, float], ...] = ()
    scale: Scale = Scale.SIGNED

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def stocks(self) -> List[StockId]:
        return [s for s, _ in self.entries]

    def as_dict(self) -> Dict[StockId, float]:
        return dict(self.entries)

    def signed(self, value: float) -> float:
        return signed_value(value, self.scale)


@dataclass(frozen=True)
class GroupAssignment:
    date: dt.date
    k: int
    groups: Mapping[StockId, int]

    def members(self, group: int) -> List[StockId]:
        return sorted(s for s, g in self.groups.items() if g == group)

    def sizes(self) -> List[int]:
        counts = Counter(self.groups.values())
        return [counts.get(g, 0) for g in range(1, self.k + 1)]


def aggregate_daily(scored: Iterable[Tuple[NewsRecord, SentimentScore]],
                    calendar: Optional[TradingCalendar] = None) -> FactorPanel:
    """Mean of each stock's same-day scores. News dated off-calendar is dropped."""
    buckets: Dict[Tuple[StockId, dt.date], List[float]] = defaultdict(list)
    kinds: Set[ProviderKind] = set()
    scales: Set[Scale] = set()
    dropped = 0
    for record, score in scored:
        kinds.add(score.provider)
        scales.add(score.scale)
        if calendar is not None and record.date not in calendar:
            dropped += 1
            continue
        buckets[(record.stock, record.date)].append(score.value)
    if len(kinds) > 1:
        names = ", ".join(sorted(k.value for k in kinds))
        raise MixedProviders(f"scores come from more than one provider kind: {names}")
    if len(scales) > 1:
        raise MixedProviders("scores mix Signed and Unit scales")
    if dropped:
        log.info("dropped %d scored news item(s) dated outside the trading calendar", dropped)
    values = {key: math.fsum(vals) / len(vals) for key, vals in buckets.items()}
    return FactorPanel(values, next(iter(kinds), None), next(iter(scales), Scale.SIGNED))


def rank_daily(panel: FactorPanel, date: dt.date) -> DailyRanking:
    entries = sorted(panel.on(date).items(), key=lambda sv: (-sv[1], sv[0]))
    return DailyRanking(date, tuple(entries), panel.scale)


def carry_forward(panel: FactorPanel, horizon_days: Optional[int], calendar: TradingCalendar) -> FactorPanel:
    """Fill gaps with the last value seen at most ``horizon_days`` trading days earlier.

    ``None`` means no limit.
    """
    if horizon_days is not None and horizon_days < 0:
        raise ValueError("horizon_days must be >= 0")
    if horizon_days == 0:
        return panel
    last: Dict[StockId, Tuple[int, float]] = {}
    filled: Dict[Tuple[StockId, dt.date], float] = dict(panel.values)
    for i, d in enumerate(calendar.dates):
        today = panel.on(d)
        for stock, v in today.items():
            last[stock] = (i, v)
        for stock, (seen, v) in last.items():
            if stock in today:
                continue
            if horizon_days is None or i - seen <= horizon_days:
                filled[(stock, d)] = v
    return FactorPanel(filled, panel.provider, panel.scale)


def assign_groups(held: Iterable[StockId], ranking: DailyRanking, k: int) -> GroupAssignment:
    """Split held stocks into ``k`` ascending-factor groups, 1 = lowest.

    Sizes differ by at most one; the first ``n % k`` groups get the extra stock.
    """
    if k < 2:
        raise ValueError("group count must be >= 2")
    held = sorted(set(held))
    if k > len(held):
        raise TooFewStocks(f"{len(held)} held stock(s) cannot fill {k} groups", location=ranking.date.isoformat())
    values = ranking.as_dict()
    missing = [s for s in held if s not in values]
    if missing:
        raise MissingFactor(f"held stock {missing[0]} has no factor on {ranking.date}",
                            location=f"{missing[0]}@{ranking.date.isoformat()}")
    ordered = sorted(held, key=lambda s: (values[s], s))
    base, extra = divmod(len(ordered), k)
    groups: Dict[StockId, int] = {}
    start = 0
    for g in range(1, k + 1):
        size = base + (1 if g <= extra else 0)
        for s in ordered[start:start + size]:
            groups[s] = g
        start += size
    return GroupAssignment(ranking.date, k, groups)


def holding_assignments(held_by_day: Iterable[Tuple[dt.date, Sequence[StockId]]], panel: FactorPanel,
                        calendar: TradingCalendar, k: int) -> List[Optional[GroupAssignment]]:
    """Re-form the k groups every day from end-of-day holdings.

    Held stocks are ranked by their latest factor, however old. Days holding
    fewer than ``k`` stocks get ``None``.
    """
    full = carry_forward(panel, None, calendar)
    out: List[Optional[GroupAssignment]] = []
    for d, held in held_by_day:
        if len(held) < k:
            out.append(None)
            continue
        out.append(assign_groups(held, rank_daily(full, d), k))
    skipped = sum(1 for a in out if a is None)
    if skipped:
        log.info("group analysis: %d day(s) held fewer than %d stocks and were skipped", skipped, k)
    return out


# ---------- panel interchange ----------

def export_panel(panel: FactorPanel, path: str | pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    kind = panel.provider.value if panel.provider else ""
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for d in panel.dates():
            for stock, v in sorted(panel.on(d).items()):
                w.writerow([str(stock), d.isoformat(), repr(v), kind, panel.scale.value])
    return path


def load_panel(path: str | pathlib.Path, calendar: TradingCalendar) -> FactorPanel:
    path = pathlib.Path(path)
    try:
        df = read_csv_table(path, "load_panel")
    except pd.errors.EmptyDataError:
        raise SchemaError(str(path), "<header>", "load_panel") from None
    for col in PANEL_COLUMNS[:4]:
        if col not in df.columns:
            raise SchemaError(str(path), col, "load_panel")
    values: Dict[Tuple[StockId, dt.date], float] = {}
    issues: List[RowIssue] = []
    kinds: Set[str] = set()
    scales: Set[str] = set()
    for line, row in enumerate(df.to_dict("records"), start=2):
        try:
            stock = parse_stock_id(row["stock_id"])
        except MalformedStockId as e:
            issues.append(RowIssue(line, "stock_id", "MalformedStockId", e.message))
            continue
        try:
            d = dt.date.fromisoformat(row["date"].strip())
        except ValueError:
            issues.append(RowIssue(line, "date", "BadDate", f"not an ISO date: {row['date']!r}"))
            continue
        try:
            v = float(row["factor_value"])
        except ValueError:
            v = math.nan
        if not math.isfinite(v):
            issues.append(RowIssue(line, "factor_value", "BadNumber", f"not a finite number: {row['factor_value']!r}"))
            continue
        if d not in calendar:
            issues.append(RowIssue(line, "date", "DateNotInCalendar", f"{d} is not a trading date"))
            continue
        if (stock, d) in values:
            issues.append(RowIssue(line, "stock_id", "DuplicateKey", f"second value for {stock} on {d}"))
            continue
        values[(stock, d)] = v
        kinds.add(row["provider_kind"].strip())
        scales.add(row.get("scale", "").strip())
    if issues:
        raise RowErrors(str(path), issues, "load_panel")
    if len(kinds) > 1:
        raise MixedProviders(f"{path.name} mixes provider kinds: {', '.join(sorted(kinds))}", operation="load_panel")
    kind = ProviderKind(kinds.pop()) if kinds and "" not in kinds else None
    scale_name = scales.pop() if len(scales) == 1 else ""
    if scale_name:
        scale = Scale(scale_name)
    else:
        scale = Scale.UNIT if kind is ProviderKind.CONTINUOUS_POSITIVE_PROB else Scale.SIGNED
    log.info("loaded factor panel %s: %d value(s) over %d date(s)", path.name, len(values), len({d for _, d in values}))
    return FactorPanel(values, kind, scale)


def coverage_summary(panel: FactorPanel, calendar: Sequence[dt.date]) -> Dict[str, float]:
    counts = [panel.coverage.get(d, 0) for d in calendar]
    if not counts:
        return {"days": 0, "mean_stocks": 0.0, "empty_days": 0}
    return {"days": len(counts), "mean_stocks": sum(counts) / len(counts), "empty_days": sum(1 for c in counts if c == 0)}
