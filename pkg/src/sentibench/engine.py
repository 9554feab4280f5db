"""Daily rebalance simulator.

Each trading day at the open: sell held stocks whose factor is at or below the
sell threshold, then buy the best-ranked unheld stocks above the buy threshold
with the cash left, all at the 09:30-09:35 VWAP. Positions are marked at the
close; a holding that cannot trade enters the opening NAV at its previous close.
Money is exact at 4 decimal places throughout.
"""

from __future__ import annotations
import csv
import datetime as dt
import logging
import pathlib
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, ROUND_HALF_EVEN, Decimal
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .config import BacktestConfig
from .errors import BacktestError, NoLiquidity, ProtocolViolation, SentibenchError
from .factor import DailyRanking, FactorPanel, rank_daily
from .ingest import PriceDataset
from .model import MONEY_SCALE, Money, StockId, money_sum

log = logging.getLogger(__name__)


class Side(str, Enum):
    BUY = "Buy"
    SELL = "Sell"


@dataclass(frozen=True)
class Trade:
    date: dt.date
    stock: StockId
    side: Side
    shares: int
    fill_price: Decimal
    gross_value: Money
    fee: Money

    @property
    def cash_delta(self) -> Money:
        if self.side is Side.SELL:
            return self.gross_value - self.fee
        return -(self.gross_value + self.fee)


@dataclass(frozen=True)
class PortfolioState:
    date: Optional[dt.date]
    cash: Money
    holdings: Mapping[StockId, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "holdings", dict(sorted(self.holdings.items())))
        if self.cash < Money.zero():
            raise ProtocolViolation(f"cash went negative: {self.cash}", location=str(self.date))
        for stock, shares in self.holdings.items():
            if shares <= 0:
                raise ProtocolViolation(f"{stock} held with {shares} shares", location=str(self.date))

    @classmethod
    def initial(cls, date: Optional[dt.date], cash: Money | Decimal | int) -> "PortfolioState":
        return cls(date, Money.of(cash), {})

    def nav(self, marks: Mapping[StockId, Decimal]) -> Money:
        return self.cash + money_sum(Money(marks[s] * n) for s, n in self.holdings.items())


@dataclass(frozen=True)
class SizingDiagnostics:
    capped_buys: int = 0        # dropped by max_buys_per_day
    capped_sells: int = 0       # dropped by max_sells_per_day
    dropped_zero_lot: int = 0   # budget below one lot
    truncated_buys: int = 0     # dropped by the turnover cap
    truncated_sells: int = 0

    def __add__(self, other: "SizingDiagnostics") -> "SizingDiagnostics":
        return SizingDiagnostics(*(a + b for a, b in zip(self.astuple(), other.astuple())))

    def astuple(self) -> Tuple[int, ...]:
        return (self.capped_buys, self.capped_sells, self.dropped_zero_lot, self.truncated_buys, self.truncated_sells)

    def as_dict(self) -> Dict[str, int]:
        return dict(zip(("capped_buys", "capped_sells", "dropped_zero_lot", "truncated_buys", "truncated_sells"),
                        self.astuple()))


@dataclass(frozen=True)
class DailyLedger:
    date: dt.date
    trades: Tuple[Trade, ...]
    nav_open: Money
    nav_close: Money
    turnover_value: Money
    benchmark_return: float
    held: Tuple[StockId, ...] = ()
    diagnostics: SizingDiagnostics = field(default_factory=SizingDiagnostics)

    @property
    def holdings_count(self) -> int:
        return len(self.held)

    @property
    def fees(self) -> Money:
        return money_sum(t.fee for t in self.trades)

    def buys(self) -> List[Trade]:
        return [t for t in self.trades if t.side is Side.BUY]

    def sells(self) -> List[Trade]:
        return [t for t in self.trades if t.side is Side.SELL]


@dataclass(frozen=True)
class DayQuotes:
    """Executable opening fills (tradable stocks only), closes, and the previous day's closes."""

    date: dt.date
    fills: Mapping[StockId, Decimal]
    closes: Mapping[StockId, Decimal]
    previous: Mapping[StockId, Decimal] = field(default_factory=dict)

    def tradable(self, stock: StockId) -> bool:
        return stock in self.fills

    def open_mark(self, stock: StockId) -> Decimal:
        """Fill price if tradable, else the last close known before the open."""
        if stock in self.fills:
            return self.fills[stock]
        if stock in self.previous:
            return self.previous[stock]
        # first calendar day: nothing earlier to mark against
        return self.closes[stock]


@dataclass(frozen=True)
class BacktestResult:
    ledgers: Tuple[DailyLedger, ...]
    final_state: PortfolioState

    def diagnostics(self) -> SizingDiagnostics:
        total = SizingDiagnostics()
        for ledger in self.ledgers:
            total = total + ledger.diagnostics
        return total


def compute_vwap(window_trades: Iterable[Tuple[Decimal, int]]) -> Decimal:
    trades = list(window_trades)
    volume = sum(v for _, v in trades)
    if volume <= 0:
        raise NoLiquidity("no volume in the opening window")
    value = sum((Decimal(p) * v for p, v in trades), Decimal(0))
    return (value / volume).quantize(MONEY_SCALE, rounding=ROUND_HALF_EVEN)


def quotes_for_day(prices: PriceDataset, d: dt.date) -> DayQuotes:
    fills: Dict[StockId, Decimal] = {}
    closes: Dict[StockId, Decimal] = {}
    for stock, rec in prices.on(d).items():
        closes[stock] = rec.close
        if not rec.tradable:
            continue
        if rec.vwap is not None:
            fills[stock] = rec.vwap.quantize(MONEY_SCALE, rounding=ROUND_HALF_EVEN)
            continue
        try:
            fills[stock] = compute_vwap(rec.window_trades)
        except NoLiquidity:
            log.debug("%s %s: no opening liquidity, not tradable", stock, d)
    prev = prices.calendar.previous_date(d)
    previous = {s: r.close for s, r in prices.on(prev).items()} if prev is not None else {}
    return DayQuotes(d, fills, closes, previous)


def select_trades(state: PortfolioState, ranking: DailyRanking, cfg: BacktestConfig,
                  quotes: Optional[DayQuotes] = None) -> Tuple[List[StockId], List[StockId]]:
    """Buy list best-first and sell list worst-first, both capped and tradable only."""
    buys, sells = _candidates(state, ranking, cfg, quotes)
    return buys[:cfg.max_buys_per_day], sells[:cfg.max_sells_per_day]


def _candidates(state, ranking, cfg, quotes):
    def ok(stock):
        return quotes is None or quotes.tradable(stock)

    sells = [s for s, v in reversed(ranking.entries)
             if s in state.holdings and ranking.signed(v) <= cfg.sell_threshold and ok(s)]
    buys = [s for s, v in ranking.entries
            if s not in state.holdings and ranking.signed(v) > cfg.buy_threshold and ok(s)]
    return buys, sells


def _fee(gross: Money, rate: Decimal) -> Money:
    return Money(gross.amount * rate)


def _buy_cost(price: Decimal, shares: int, rate: Decimal) -> Money:
    gross = Money(price * shares)
    return gross + _fee(gross, rate)


def size_orders(buys: Sequence[StockId], sells: Sequence[StockId], state: PortfolioState, quotes: DayQuotes,
                cfg: BacktestConfig) -> Tuple[List[Trade], SizingDiagnostics]:
    d = quotes.date
    lot = cfg.lot_size
    buy_rate, sell_rate = cfg.buy_fee_rate(), cfg.sell_fee_rate()
    nav_open = state.nav({s: quotes.open_mark(s) for s in state.holdings})
    # (buy gross + sell gross) / 2 <= limit  <=>  buy gross + sell gross <= 2 * limit
    limit = (cfg.turnover_cap * nav_open.amount).quantize(MONEY_SCALE, rounding=ROUND_FLOOR)
    two_sided_limit = 2 * limit

    sell_trades: List[Trade] = []
    for stock in sells:
        shares = state.holdings[stock]
        price = quotes.fills[stock]
        gross = Money(price * shares)
        sell_trades.append(Trade(d, stock, Side.SELL, shares, price, gross, _fee(gross, sell_rate)))
    truncated_sells = 0
    while sell_trades and money_sum(t.gross_value for t in sell_trades).amount > two_sided_limit:
        sell_trades.pop()
        truncated_sells += 1

    budget = state.cash + money_sum(t.cash_delta for t in sell_trades)
    buy_trades: List[Trade] = []
    dropped = 0
    if buys:
        per_stock = (budget.amount / len(buys)).quantize(MONEY_SCALE, rounding=ROUND_FLOOR)
        for stock in buys:
            price = quotes.fills[stock]
            lots = int(per_stock // (price * lot * (1 + buy_rate)))
            # fee rounding can move the boundary by one lot either way
            while lots > 0 and _buy_cost(price, lots * lot, buy_rate).amount > per_stock:
                lots -= 1
            while _buy_cost(price, (lots + 1) * lot, buy_rate).amount <= per_stock:
                lots += 1
            if lots == 0:
                dropped += 1
                continue
            gross = Money(price * lots * lot)
            buy_trades.append(Trade(d, stock, Side.BUY, lots * lot, price, gross, _fee(gross, buy_rate)))

    sell_gross = money_sum(t.gross_value for t in sell_trades).amount
    truncated_buys = 0
    while buy_trades and sell_gross + money_sum(t.gross_value for t in buy_trades).amount > two_sided_limit:
        buy_trades.pop()
        truncated_buys += 1
    if truncated_buys or truncated_sells:
        log.debug("%s: turnover cap dropped %d buy(s) and %d sell(s)", d, truncated_buys, truncated_sells)

    diag = SizingDiagnostics(dropped_zero_lot=dropped, truncated_buys=truncated_buys, truncated_sells=truncated_sells)
    return sell_trades + buy_trades, diag


def step_day(state: PortfolioState, ranking: DailyRanking, prices: PriceDataset,
             cfg: BacktestConfig) -> Tuple[PortfolioState, DailyLedger]:
    d = state.date
    if ranking.date != d:
        raise ProtocolViolation(f"ranking dated {ranking.date} used on portfolio date {d}", location=str(d))
    quotes = quotes_for_day(prices, d)
    missing = [s for s in state.holdings if s not in quotes.closes]
    if missing:
        raise ProtocolViolation(f"held stock {missing[0]} has no price on {d}", location=f"{missing[0]}@{d}")

    nav_open = state.nav({s: quotes.open_mark(s) for s in state.holdings})
    all_buys, all_sells = _candidates(state, ranking, cfg, quotes)
    buys, sells = all_buys[:cfg.max_buys_per_day], all_sells[:cfg.max_sells_per_day]
    trades, diag = size_orders(buys, sells, state, quotes, cfg)
    diag = diag + SizingDiagnostics(capped_buys=len(all_buys) - len(buys), capped_sells=len(all_sells) - len(sells))

    cash = state.cash
    holdings = dict(state.holdings)
    for t in trades:
        cash = cash + t.cash_delta
        if t.side is Side.SELL:
            del holdings[t.stock]
        else:
            holdings[t.stock] = holdings.get(t.stock, 0) + t.shares
    if cash < Money.zero():
        raise ProtocolViolation(f"trades on {d} overdraw cash to {cash}", location=str(d))

    nav_close = cash + money_sum(Money(quotes.closes[s] * n) for s, n in sorted(holdings.items()))
    turnover = Money(money_sum(t.gross_value for t in trades).amount / 2)
    ledger = DailyLedger(date=d, trades=tuple(trades), nav_open=nav_open, nav_close=nav_close,
                         turnover_value=turnover, benchmark_return=prices.benchmark_return(d),
                         held=tuple(sorted(holdings)), diagnostics=diag)
    next_date = prices.calendar.next_date(d) or d
    return PortfolioState(next_date, cash, holdings), ledger


def run_backtest(panel: FactorPanel, prices: PriceDataset, cfg: BacktestConfig) -> BacktestResult:
    calendar = prices.calendar
    first = calendar.dates[0] if len(calendar) else None
    state = PortfolioState.initial(first, cfg.initial_cash)
    ledgers: List[DailyLedger] = []
    for d in calendar:
        try:
            state, ledger = step_day(state, rank_daily(panel, d), prices, cfg)
        except (SentibenchError, ArithmeticError, LookupError, ValueError) as e:
            raise BacktestError(d.isoformat(), e) from e
        ledgers.append(ledger)
    if ledgers:
        last = ledgers[-1]
        log.info("backtest: %d day(s), %d trade(s), final nav %s", len(ledgers),
                 sum(len(l.trades) for l in ledgers), last.nav_close)
    return BacktestResult(tuple(ledgers), state)


# ---------- exports ----------

LEDGER_COLUMNS = ("date", "stock_id", "side", "shares", "fill_price", "gross_value", "fee")
NAV_COLUMNS = ("date", "nav_open", "nav_close", "benchmark_level")


def export_ledger(ledgers: Iterable[DailyLedger], path: str | pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for ledger in ledgers:
            for t in ledger.trades:
                w.writerow([t.date.isoformat(), str(t.stock), t.side.value, t.shares, f"{t.fill_price:.4f}",
                            str(t.gross_value), str(t.fee)])
    return path


def export_nav(ledgers: Iterable[DailyLedger], benchmark: Mapping[dt.date, float],
               path: str | pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(NAV_COLUMNS)
        for ledger in ledgers:
            w.writerow([ledger.date.isoformat(), str(ledger.nav_open), str(ledger.nav_close),
                        repr(float(benchmark[ledger.date]))])
    return path
