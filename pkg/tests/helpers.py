"""Builders for small in-memory universes shared by the test modules."""

from __future__ import annotations
import datetime as dt
from decimal import Decimal
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from sentibench.config import BacktestConfig
from sentibench.factor import FactorPanel
from sentibench.ingest import PriceDataset
from sentibench.model import DailyPriceRecord, ProviderKind, Scale, TradingCalendar, parse_stock_id

Fill = Union[None, str, List[Tuple[str, int]]]

STOCKS = ["SSE:600000", "SZSE:000002", "SSE:600002", "SZSE:000004", "SSE:600004"]


def bdays(n: int, start: dt.date = dt.date(2022, 1, 4)) -> List[dt.date]:
    return [ts.date() for ts in pd.bdate_range(start, periods=n)]


def calendar(n: int) -> TradingCalendar:
    return TradingCalendar(tuple(bdays(n)))


def sid(raw: str):
    return parse_stock_id(raw)


def price_dataset(closes: Dict[str, Sequence[Optional[str]]], fills: Dict[str, Sequence[Fill]],
                  bench: Optional[Sequence[float]] = None) -> PriceDataset:
    """``fills[s][i]`` is a VWAP string, a list of (price, volume) window trades, or None for non-tradable.

    A window with no volume at all gives a non-tradable row that still carries its trades. A None close
    means no row.
    """
    n = len(next(iter(closes.values())))
    cal = calendar(n)
    records = {}
    for s, cs in closes.items():
        for i, c in enumerate(cs):
            if c is None:
                continue
            f = fills[s][i]
            window = tuple((Decimal(p), int(v)) for p, v in f) if isinstance(f, list) else ()
            records[(sid(s), cal.dates[i])] = DailyPriceRecord(
                stock=sid(s), date=cal.dates[i], close=Decimal(c),
                tradable=f is not None and (not window or any(v > 0 for _, v in window)),
                window_trades=window, vwap=Decimal(f) if isinstance(f, str) else None)
    levels = bench or [100.0 + i for i in range(n)]
    return PriceDataset(records=records, calendar=cal, benchmark=dict(zip(cal.dates, levels)))


def panel(values: Dict[str, Sequence[Optional[float]]], n: int, scale: Scale = Scale.SIGNED,
          provider: ProviderKind = ProviderKind.DISCRETE_THREE_CLASS) -> FactorPanel:
    days = bdays(n)
    return FactorPanel({(sid(s), days[i]): v for s, vs in values.items() for i, v in enumerate(vs) if v is not None},
                       provider, scale)


def backtest_config(**overrides) -> BacktestConfig:
    base = dict(initial_cash=Decimal("1000000"))
    base.update(overrides)
    return BacktestConfig(**base)


def _opening_window(rng: np.random.Generator, fill: float, zero_volume: bool = False) -> List[Tuple[str, int]]:
    prices = [f"{max(0.01, fill * (1 + float(rng.normal(0, 0.003)))):.2f}" for _ in range(5)]
    if zero_volume:
        return [(p, 0) for p in prices]
    volumes = [int(v) * 100 for v in rng.integers(0, 50, size=5)]
    volumes[int(rng.integers(0, 5))] += 100
    return list(zip(prices, volumes))


def random_fill(rng: np.random.Generator, fill: float) -> Fill:
    """Mostly a vendor VWAP; some raw opening windows (a few without any volume); some suspensions."""
    roll = rng.random()
    if roll < 0.6:
        return f"{fill:.4f}"
    if roll < 0.8:
        return _opening_window(rng, fill)
    if roll < 0.85:
        return _opening_window(rng, fill, zero_volume=True)
    return None


def random_universe(seed: int, max_stocks: int = 5, max_days: int = 10):
    """Random prices, factors and config; small enough for the brute-force simulator."""
    rng = np.random.default_rng(seed)
    n_stocks = int(rng.integers(1, max_stocks + 1))
    n_days = int(rng.integers(1, max_days + 1))
    stocks = STOCKS[:n_stocks]
    closes, fills, factors = {}, {}, {}
    for s in stocks:
        price = float(rng.uniform(2.0, 60.0))
        cs, fs, vs = [], [], []
        for _ in range(n_days):
            fill = max(0.01, price * (1 + float(rng.normal(0, 0.01))))
            price = max(0.01, fill * (1 + float(rng.normal(0, 0.03))))
            cs.append(f"{price:.2f}")
            fs.append(random_fill(rng, fill))
            roll = rng.random()
            if roll < 0.2:
                vs.append(None)
            elif roll < 0.6:
                vs.append(float(rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0])))
            else:
                vs.append(round(float(rng.uniform(-1, 1)), 6))
        closes[s], fills[s], factors[s] = cs, fs, vs
    bench = [round(3000 * (1 + float(rng.normal(0, 0.01))) ** i, 4) for i in range(n_days)]
    sell_t = float(rng.choice([-0.5, 0.0, 0.25]))
    cfg = backtest_config(
        max_buys_per_day=int(rng.integers(1, 6)),
        max_sells_per_day=int(rng.integers(1, 6)),
        turnover_cap=Decimal(str(rng.choice(["0.1", "0.35", "0.5", "1.0"]))),
        fee_rate=Decimal(str(rng.choice(["0.0015", "0.003"]))),
        sell_threshold=sell_t,
        buy_threshold=sell_t + float(rng.choice([0.0, 0.25, 0.5])),
        initial_cash=Decimal(int(rng.integers(50_000, 2_000_000))),
        lot_size=int(rng.choice([1, 100])),
        stamp_duty_sell_only=bool(rng.random() < 0.3),
    )
    return price_dataset(closes, fills, bench), panel(factors, n_days), cfg
