"""Back-test performance metrics and the factor-group excess-return curves."""

from __future__ import annotations
import datetime as dt
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import MetricsConfig
from .errors import AlignmentError, DegenerateVariance, EmptySeries, InvalidNav, MissingAssignment
from .factor import GroupAssignment
from .ingest import PriceDataset

log = logging.getLogger(__name__)

RETURN_COLUMNS = ("Factor Name", "Annual Excess Return (%)", "Annual Net Asset Return (%)", "Win Rate (%)",
                  "Sharpe Ratio", "Max Withdrawal Rate")
HOLDING_COLUMNS = ("Average Stocks Held per Day", "Turn-over Ratio (%)")
REPORT_COLUMNS = RETURN_COLUMNS + HOLDING_COLUMNS
CONVENTION_COLUMNS = ("Risk-free Rate (%)", "Trading Days per Year", "Excess Mode", "Drawdown Basis")


@dataclass(frozen=True)
class ReturnSeries:
    dates: Tuple[dt.date, ...]
    returns: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", tuple(float(r) for r in self.returns))
        if len(self.dates) != len(self.returns):
            raise AlignmentError(f"{len(self.dates)} date(s) for {len(self.returns)} return(s)", operation="ReturnSeries")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise AlignmentError(f"dates not strictly increasing at {a} -> {b}", operation="ReturnSeries")
        if not all(math.isfinite(r) for r in self.returns):
            raise ValueError("returns must be finite")

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.returns, dtype=float)

    def cumulative(self) -> np.ndarray:
        """Compounded return to date for every day."""
        return np.cumprod(1.0 + self.values) - 1.0


def _positive_navs(navs: Sequence, operation: str) -> np.ndarray:
    arr = np.asarray([float(n) for n in navs], dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        bad = next(i for i, v in enumerate(arr) if not (math.isfinite(v) and v > 0))
        raise InvalidNav(f"NAV must be positive, got {navs[bad]} at position {bad}", operation=operation)
    return arr


def daily_returns(navs: Sequence, dates: Sequence[dt.date]) -> ReturnSeries:
    """``navs[0]`` is the opening base; ``navs[i + 1]`` is the close on ``dates[i]``."""
    if len(navs) < 2:
        raise EmptySeries("need at least 2 NAV points", operation="daily_returns")
    if len(navs) != len(dates) + 1:
        raise AlignmentError(f"{len(navs)} NAV point(s) for {len(dates)} date(s)", operation="daily_returns")
    arr = _positive_navs(navs, "daily_returns")
    return ReturnSeries(tuple(dates), tuple(arr[1:] / arr[:-1] - 1.0))


def portfolio_returns(ledgers) -> ReturnSeries:
    if not ledgers:
        raise EmptySeries("no ledgers", operation="daily_returns")
    navs = [ledgers[0].nav_open] + [l.nav_close for l in ledgers]
    return daily_returns(navs, [l.date for l in ledgers])


def benchmark_returns(ledgers) -> ReturnSeries:
    return ReturnSeries(tuple(l.date for l in ledgers), tuple(l.benchmark_return for l in ledgers))


def annualize(series: ReturnSeries, days_per_year: int = 243) -> float:
    if not len(series):
        raise EmptySeries("cannot annualize an empty series", operation="annualize")
    if days_per_year <= 0:
        raise ValueError("days_per_year must be > 0")
    growth = float(np.prod(1.0 + series.values))
    return (growth ** (days_per_year / len(series)) - 1.0) * 100.0


def excess_return_series(port: ReturnSeries, bench: ReturnSeries) -> ReturnSeries:
    if port.dates != bench.dates:
        raise AlignmentError("portfolio and benchmark returns cover different dates")
    return ReturnSeries(port.dates, tuple(port.values - bench.values))


def win_rate(series: ReturnSeries) -> float:
    if not len(series):
        raise EmptySeries("win rate of an empty series", operation="win_rate")
    return 100.0 * int(np.count_nonzero(series.values > 0)) / len(series)


def sharpe(series: ReturnSeries, risk_free_annual: float = 0.0, days_per_year: int = 243) -> float:
    """Annualized (mean(r - rf) / sample stdev(r)) * sqrt(days_per_year); rf in %/yr."""
    r = series.values
    if len(r) < 2:
        raise DegenerateVariance(f"need at least 2 returns, got {len(r)}")
    if np.ptp(r) == 0:
        raise DegenerateVariance("constant return series has no variance")
    sd = float(np.std(r, ddof=1))
    if sd == 0:
        raise DegenerateVariance("zero sample standard deviation")
    rf_daily = (1.0 + risk_free_annual / 100.0) ** (1.0 / days_per_year) - 1.0
    return float(np.mean(r - rf_daily)) / sd * math.sqrt(days_per_year)


def max_drawdown(navs: Sequence) -> float:
    if not len(navs):
        raise EmptySeries("drawdown of an empty series", operation="max_drawdown")
    arr = _positive_navs(navs, "max_drawdown")
    peak = np.maximum.accumulate(arr)
    return float(np.max((peak - arr) / peak))


def _holdings_count(item) -> int:
    return item if isinstance(item, int) else item.holdings_count


def avg_stocks_held(ledgers) -> float:
    """Mean end-of-day holdings count. Accepts ledgers or plain counts."""
    counts = [_holdings_count(x) for x in ledgers]
    if not counts:
        raise EmptySeries("no days to average", operation="avg_stocks_held")
    return sum(counts) / len(counts)


def turnover_ratio(ledgers) -> float:
    """Mean of 100 * turnover_value / nav_open over days, in %/day."""
    if not ledgers:
        raise EmptySeries("no days to average", operation="turnover_ratio")
    daily = []
    for l in ledgers:
        nav_open = float(l.nav_open)
        if nav_open <= 0:
            raise InvalidNav(f"{l.date}: nav_open must be > 0, got {l.nav_open}", operation="turnover_ratio")
        daily.append(100.0 * float(l.turnover_value) / nav_open)
    return math.fsum(daily) / len(daily)


@dataclass(frozen=True)
class GroupCurves:
    dates: Tuple[dt.date, ...]
    curves: Tuple[Tuple[float, ...], ...]   # curves[g - 1][i]: group g, day i
    active_days: int = 0

    @property
    def k(self) -> int:
        return len(self.curves)

    def final(self) -> Tuple[float, ...]:
        return tuple(c[-1] if c else 0.0 for c in self.curves)


def group_excess_curves(ledgers, assignments: Sequence[Optional[GroupAssignment]], prices: PriceDataset,
                        bench: Optional[ReturnSeries] = None, k: Optional[int] = None) -> GroupCurves:
    """Cumulative excess return of each group's equal-weighted holdings.

    A stock's return on day d is close(d) over its base, where the base is the
    fill price if it was bought on d and close(d - 1) otherwise. Days without an
    assignment leave every curve flat.
    """
    if len(assignments) != len(ledgers):
        raise AlignmentError(f"{len(assignments)} assignment(s) for {len(ledgers)} day(s)",
                             operation="group_excess_curves")
    if bench is not None and bench.dates != tuple(l.date for l in ledgers):
        raise AlignmentError("benchmark series does not match the ledger dates", operation="group_excess_curves")
    if k is None:
        k = next((a.k for a in assignments if a is not None), 0)
    level = np.ones(k)
    curves: List[List[float]] = [[] for _ in range(k)]
    active = 0
    for i, (ledger, assignment) in enumerate(zip(ledgers, assignments)):
        if assignment is not None:
            active += 1
            d = ledger.date
            bench_r = bench.returns[i] if bench is not None else ledger.benchmark_return
            bought = {t.stock: t.fill_price for t in ledger.buys()}
            prev = prices.calendar.previous_date(d)
            by_group: List[List[float]] = [[] for _ in range(k)]
            for stock in ledger.held:
                g = assignment.groups.get(stock)
                if g is None:
                    raise MissingAssignment(str(stock), d.isoformat())
                close = prices.get(stock, d).close
                base = bought[stock] if stock in bought else prices.get(stock, prev).close
                by_group[g - 1].append(float(close) / float(base) - 1.0)
            for g, rets in enumerate(by_group):
                mean = math.fsum(rets) / len(rets) if rets else 0.0
                level[g] *= 1.0 + (mean - bench_r)
        for g in range(k):
            curves[g].append(float(level[g] - 1.0))
    return GroupCurves(tuple(l.date for l in ledgers), tuple(tuple(c) for c in curves), active)


@dataclass(frozen=True)
class MetricsReport:
    factor_name: str
    annual_excess_return: float
    annual_net_asset_return: float
    win_rate: float
    sharpe_ratio: float
    max_drawdown: float
    avg_stocks_held: float
    turnover_ratio: float
    risk_free_rate_used: float
    trading_days_per_year_used: int
    excess_mode: str = "active"
    drawdown_basis: str = "net"
    max_drawdown_net: float = 0.0
    max_drawdown_excess: float = 0.0
    days: int = 0

    def as_row(self) -> Dict[str, str]:
        """Report table row, formatted to the published precision."""
        return {
            "Factor Name": self.factor_name,
            "Annual Excess Return (%)": f"{self.annual_excess_return:.2f}",
            "Annual Net Asset Return (%)": f"{self.annual_net_asset_return:.2f}",
            "Win Rate (%)": f"{self.win_rate:.2f}",
            "Sharpe Ratio": f"{self.sharpe_ratio:.4f}",
            "Max Withdrawal Rate": f"{self.max_drawdown:.4f}",
            "Average Stocks Held per Day": f"{self.avg_stocks_held:.2f}",
            "Turn-over Ratio (%)": f"{self.turnover_ratio:.2f}",
        }

    def conventions(self) -> Dict[str, str]:
        return {
            "Risk-free Rate (%)": f"{self.risk_free_rate_used:g}",
            "Trading Days per Year": str(self.trading_days_per_year_used),
            "Excess Mode": self.excess_mode,
            "Drawdown Basis": self.drawdown_basis,
        }

    def as_dict(self) -> Dict[str, Union[str, float, int]]:
        return asdict(self)


def build_report(ledgers, factor_name: str, metrics_cfg=None) -> MetricsReport:
    cfg = metrics_cfg or MetricsConfig()
    dpy = cfg.trading_days_per_year
    port = portfolio_returns(ledgers)
    bench = benchmark_returns(ledgers)
    excess = excess_return_series(port, bench)
    net = annualize(port, dpy)
    if cfg.excess_mode == "difference":
        annual_excess = net - annualize(bench, dpy)
    else:
        annual_excess = annualize(excess, dpy)
    navs = [ledgers[0].nav_open] + [l.nav_close for l in ledgers]
    dd_net = max_drawdown(navs)
    dd_excess = max_drawdown(np.concatenate(([1.0], 1.0 + excess.cumulative())))
    return MetricsReport(
        factor_name=factor_name,
        annual_excess_return=annual_excess,
        annual_net_asset_return=net,
        win_rate=win_rate(port),
        sharpe_ratio=sharpe(port, cfg.risk_free_rate, dpy),
        max_drawdown=dd_excess if cfg.drawdown_basis == "excess" else dd_net,
        avg_stocks_held=avg_stocks_held(ledgers),
        turnover_ratio=turnover_ratio(ledgers),
        risk_free_rate_used=cfg.risk_free_rate,
        trading_days_per_year_used=dpy,
        excess_mode=cfg.excess_mode,
        drawdown_basis=cfg.drawdown_basis,
        max_drawdown_net=dd_net,
        max_drawdown_excess=dd_excess,
        days=len(ledgers),
    )
