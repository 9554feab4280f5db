"""Seeded synthetic datasets: calendar, benchmark, prices and pre-open news.

Each stock-day has a latent signal ``z``. News published before the open scores
``sigmoid(1.5 z + noise)``, and that day's return loads ``plant_corr`` on ``z``::

    r = beta * m + sigma * (rho * z + sqrt(1 - rho^2) * eps)

so ``plant_corr = 0`` gives news that carries no information.
"""

from __future__ import annotations
import csv
import datetime as dt
import logging
import math
import pathlib
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import yaml

from .model import ProviderKind

log = logging.getLogger(__name__)

SOURCES = ("newswire", "exchange_filing", "broker_note", "portal", "forum")
SOURCE_WEIGHTS = (0.35, 0.25, 0.2, 0.15, 0.05)
WINDOW = 5


@dataclass(frozen=True)
class FixtureSpec:
    seed: int = 42
    stocks: int = 5
    days: int = 10
    plant_corr: float = 0.0
    start: dt.date = dt.date(2022, 1, 4)
    coverage: float = 0.8          # chance a stock-day has pre-open news
    post_open_share: float = 0.1   # extra items published after the open
    suspend_prob: float = 0.02
    illiquid_prob: float = 0.01
    beta: float = 1.0
    sigma: float = 0.01
    market_mu: float = 0.0003
    market_sigma: float = 0.008

    def __post_init__(self):
        if self.stocks < 1 or self.days < 1:
            raise ValueError("stocks and days must be >= 1")
        if not -1.0 <= self.plant_corr <= 1.0:
            raise ValueError("plant_corr must be within [-1, 1]")


@dataclass
class Fixture:
    spec: FixtureSpec
    calendar: List[dt.date] = field(default_factory=list)
    benchmark: List[Tuple[dt.date, float]] = field(default_factory=list)
    prices: List[Dict[str, str]] = field(default_factory=list)
    news: List[Dict[str, str]] = field(default_factory=list)
    oracle: List[Dict[str, str]] = field(default_factory=list)


def stock_code(i: int) -> str:
    # alternate exchanges so both appear in small universes
    return f"SSE:{600000 + i:06d}" if i % 2 == 0 else f"SZSE:{1 + i:06d}"


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _three_class(z: float) -> str:
    if z > 0.5:
        return "GOOD NEWS"
    if z < -0.5:
        return "BAD NEWS"
    return "NOT SURE"


def generate_fixture(spec: FixtureSpec) -> Fixture:
    rng = np.random.default_rng(spec.seed & 0xFFFFFFFFFFFFFFFF)
    fx = Fixture(spec)
    fx.calendar = [ts.date() for ts in pd.bdate_range(spec.start, periods=spec.days)]
    rho = spec.plant_corr
    resid = math.sqrt(max(0.0, 1.0 - rho * rho))

    stocks = [stock_code(i) for i in range(spec.stocks)]
    last_close = {s: round(float(rng.uniform(5.0, 50.0)), 2) for s in stocks}
    level = 3000.0
    seq = 0
    for day_i, d in enumerate(fx.calendar):
        m = 0.0 if day_i == 0 else float(rng.normal(spec.market_mu, spec.market_sigma))
        level = round(level * (1.0 + m), 4)
        fx.benchmark.append((d, level))
        for s in stocks:
            z = float(rng.normal())
            eps = float(rng.normal())
            gap = float(rng.normal(0.0, 0.002))
            r = spec.beta * m + spec.sigma * (rho * z + resid * eps)

            if rng.random() < spec.coverage:
                for _ in range(int(rng.integers(1, 4))):
                    seq += 1
                    minute = int(rng.integers(0, 9 * 60 + 30))
                    p = _sigmoid(1.5 * z + float(rng.normal(0.0, 0.3)))
                    fx.news.append(_news_row(seq, s, d, minute, rng, p, f"pre-open item about {s}"))
                    fx.oracle.append({"news_id": f"N{seq:07d}", "label_or_score": _three_class(z),
                                      "provider_kind": ProviderKind.DISCRETE_THREE_CLASS.value})
            if rng.random() < spec.post_open_share:
                seq += 1
                minute = int(rng.integers(9 * 60 + 30, 15 * 60))
                p = float(rng.uniform(0.0, 1.0))
                fx.news.append(_news_row(seq, s, d, minute, rng, p, f"intraday item about {s}"))
                fx.oracle.append({"news_id": f"N{seq:07d}", "label_or_score": "NOT SURE",
                                  "provider_kind": ProviderKind.DISCRETE_THREE_CLASS.value})

            if day_i > 0 and rng.random() < spec.suspend_prob:
                continue  # no row: the loader synthesizes a suspended day
            prev = last_close[s]
            ref = prev * (1.0 + gap)
            close = max(0.01, round(ref * (1.0 + r), 2))
            row = {"stock_id": s, "date": d.isoformat(), "close": f"{close:.2f}", "tradable": "1"}
            illiquid = rng.random() < spec.illiquid_prob
            for w in range(1, WINDOW + 1):
                price = max(0.01, round(ref * (1.0 + float(rng.normal(0.0, 0.001))), 2))
                volume = 0 if illiquid else 100 * int(rng.integers(1, 50))
                row[f"w{w}_price"] = f"{price:.2f}"
                row[f"w{w}_volume"] = str(volume)
            fx.prices.append(row)
            last_close[s] = close
    log.info("fixture seed=%d: %d stock(s) x %d day(s), %d news item(s), %d price row(s)",
             spec.seed, spec.stocks, spec.days, len(fx.news), len(fx.prices))
    return fx


def _news_row(seq: int, stock: str, d: dt.date, minute: int, rng, p: float, text: str) -> Dict[str, str]:
    stamp = dt.datetime.combine(d, dt.time(minute // 60, minute % 60), tzinfo=dt.timezone(dt.timedelta(hours=8)))
    source = SOURCES[int(rng.choice(len(SOURCES), p=SOURCE_WEIGHTS))]
    return {"news_id": f"N{seq:07d}", "stock_id": stock, "timestamp": stamp.isoformat(), "source": source,
            "text": text, "score": f"{p:.6f}", "provider": ProviderKind.CONTINUOUS_POSITIVE_PROB.value}


def _write_rows(path: pathlib.Path, columns, rows) -> pathlib.Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def fixture_config(factor_name: str, *, oracle: bool = False) -> dict:
    sentiment = {"provider": "inline", "kind": ProviderKind.CONTINUOUS_POSITIVE_PROB.value}
    if oracle:
        sentiment = {"provider": "oracle", "kind": ProviderKind.DISCRETE_THREE_CLASS.value, "oracle": "oracle.csv"}
    return {
        "factor_name": factor_name,
        "data": {"news": "news.csv", "prices": "prices.csv", "benchmark": "benchmark.csv", "calendar": "calendar.csv"},
        "sentiment": sentiment,
        "factor": {"carry_forward_days": 5},
        "backtest": {"max_buys_per_day": 500, "max_sells_per_day": 500, "turnover_cap": 1.0, "fee_rate": 0.0015,
                     "buy_threshold": 0.0, "sell_threshold": 0.0, "initial_cash": 10000000, "lot_size": 100,
                     "group_count": 3},
        "metrics": {"risk_free_rate": 0.0, "trading_days_per_year": 243},
        "output": {"format": "csv", "plots": True, "html": True},
    }


def write_fixture(fx: Fixture, out_dir: str | pathlib.Path) -> List[pathlib.Path]:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    price_cols = ["stock_id", "date", "close", "tradable"]
    for w in range(1, WINDOW + 1):
        price_cols += [f"w{w}_price", f"w{w}_volume"]
    paths = [
        _write_rows(out / "calendar.csv", ["date"], [{"date": d.isoformat()} for d in fx.calendar]),
        _write_rows(out / "benchmark.csv", ["date", "index_level"],
                    [{"date": d.isoformat(), "index_level": f"{lvl:.4f}"} for d, lvl in fx.benchmark]),
        _write_rows(out / "prices.csv", price_cols, fx.prices),
        _write_rows(out / "news.csv", ["news_id", "stock_id", "timestamp", "source", "text", "score", "provider"],
                    fx.news),
        _write_rows(out / "oracle.csv", ["news_id", "label_or_score", "provider_kind"], fx.oracle),
    ]
    configs = {"config.yaml": fixture_config("synthetic-prob"),
               "config_three_class.yaml": fixture_config("synthetic-three-class", oracle=True)}
    for name, cfg in configs.items():
        p = out / name
        p.write_text(yaml.safe_dump(cfg, sort_keys=False), encoding="utf-8")
        paths.append(p)
    return paths


def gen_fixture(seed: int, stocks: int, days: int, plant_corr: float, out_dir: str | pathlib.Path) -> List[pathlib.Path]:
    return write_fixture(generate_fixture(FixtureSpec(seed=seed, stocks=stocks, days=days, plant_corr=plant_corr)),
                         out_dir)
