"""Shared domain types: stock ids, market time, calendar, news and price records, money."""

from __future__ import annotations
import bisect
import datetime as dt
import functools
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

from .errors import InvalidMoney, InvalidTimestamp, MalformedStockId

MARKET_TZ = dt.timezone(dt.timedelta(hours=8))
MARKET_OPEN = dt.time(9, 30)
MONEY_SCALE = Decimal("0.0001")

_CODE_RE = re.compile(r"^[0-9]{6}$")


class Exchange(str, Enum):
    SSE = "SSE"
    SZSE = "SZSE"


class ProviderKind(str, Enum):
    """How a sentiment provider expresses its verdict. Fixed for a run."""

    DISCRETE_THREE_CLASS = "DiscreteThreeClass"          # prompt-style GOOD/NOT SURE/BAD
    CONTINUOUS_POSITIVE_PROB = "ContinuousPositiveProb"  # softmax positive probability
    DISCRETE_CLASSIFIER = "DiscreteClassifier"           # Positive/Neutral/Negative classes


class Scale(str, Enum):
    SIGNED = "Signed"  # [-1, +1]
    UNIT = "Unit"      # [0, 1]


@functools.total_ordering
@dataclass(frozen=True)
class StockId:
    exchange: Exchange
    code: str

    def __post_init__(self):
        if not isinstance(self.exchange, Exchange):
            object.__setattr__(self, "exchange", Exchange(self.exchange))
        if not _CODE_RE.match(self.code):
            raise MalformedStockId(f"{self.exchange.value}:{self.code}", "code", "must be exactly 6 digits")

    def __lt__(self, other: "StockId") -> bool:
        if not isinstance(other, StockId):
            return NotImplemented
        return (self.exchange.value, self.code) < (other.exchange.value, other.code)

    def __str__(self) -> str:
        return f"{self.exchange.value}:{self.code}"


def parse_stock_id(raw: str, exchange: Optional[Union[str, Exchange]] = None) -> StockId:
    """Parse ``"SSE:600519"``, or a bare 6-digit code when ``exchange`` is given separately."""
    text = (raw or "").strip()
    if ":" in text:
        ex_part, code = text.split(":", 1)
    elif exchange is not None:
        ex_part, code = (exchange.value if isinstance(exchange, Exchange) else str(exchange)), text
    else:
        raise MalformedStockId(raw, "exchange", "missing (expected EXCHANGE:CODE)")
    try:
        ex = Exchange(ex_part.strip().upper())
    except ValueError:
        raise MalformedStockId(raw, "exchange", f"unknown exchange {ex_part!r}") from None
    code = code.strip()
    if not code.isdigit():
        raise MalformedStockId(raw, "code", "must contain only digits")
    if len(code) != 6:
        raise MalformedStockId(raw, "code", f"must be 6 digits, got {len(code)}")
    return StockId(ex, code)


@functools.total_ordering
@dataclass(frozen=True)
class MarketTimestamp:
    """Minute-precision wall-clock time in UTC+8."""

    date: dt.date
    time: dt.time

    def __post_init__(self):
        if self.time.second or self.time.microsecond or self.time.tzinfo is not None:
            object.__setattr__(self, "time", dt.time(self.time.hour, self.time.minute))

    @property
    def zone(self) -> dt.timezone:
        return MARKET_TZ

    @classmethod
    def parse(cls, raw: str) -> "MarketTimestamp":
        try:
            stamp = dt.datetime.fromisoformat(raw.strip())
        except (ValueError, AttributeError):
            raise InvalidTimestamp(f"unparseable timestamp {raw!r}") from None
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=MARKET_TZ)
        local = stamp.astimezone(MARKET_TZ)
        # seconds truncate toward the earlier minute
        return cls(local.date(), dt.time(local.hour, local.minute))

    def isoformat(self) -> str:
        return dt.datetime.combine(self.date, self.time, tzinfo=MARKET_TZ).isoformat()

    def __lt__(self, other: "MarketTimestamp") -> bool:
        if not isinstance(other, MarketTimestamp):
            return NotImplemented
        return (self.date, self.time) < (other.date, other.time)

    def is_pre_open(self) -> bool:
        return is_pre_open(self)


def is_pre_open(ts: MarketTimestamp) -> bool:
    return ts.time < MARKET_OPEN


@dataclass(frozen=True)
class TradingCalendar:
    dates: Tuple[dt.date, ...]

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValueError(f"calendar not strictly increasing at {a} -> {b}")

    def __len__(self) -> int:
        return len(self.dates)

    def __iter__(self):
        return iter(self.dates)

    def __contains__(self, d: object) -> bool:
        return self.contains(d)  # type: ignore[arg-type]

    def contains(self, d: dt.date) -> bool:
        i = bisect.bisect_left(self.dates, d)
        return i < len(self.dates) and self.dates[i] == d

    def index(self, d: dt.date) -> int:
        i = bisect.bisect_left(self.dates, d)
        if i == len(self.dates) or self.dates[i] != d:
            raise KeyError(f"{d} is not a trading date")
        return i

    def next_date(self, d: dt.date) -> Optional[dt.date]:
        i = bisect.bisect_right(self.dates, d)
        return self.dates[i] if i < len(self.dates) else None

    def previous_date(self, d: dt.date) -> Optional[dt.date]:
        i = bisect.bisect_left(self.dates, d)
        return self.dates[i - 1] if i > 0 else None


@dataclass(frozen=True)
class NewsRecord:
    news_id: str
    stock: StockId
    timestamp: MarketTimestamp
    source: str
    text: Optional[str] = None
    score: Optional[float] = None
    provider: Optional[str] = None

    @property
    def date(self) -> dt.date:
        return self.timestamp.date


@dataclass(frozen=True)
class DailyPriceRecord:
    stock: StockId
    date: dt.date
    close: Decimal
    tradable: bool
    window_trades: Tuple[Tuple[Decimal, int], ...] = ()
    vwap: Optional[Decimal] = None

    def __post_init__(self):
        object.__setattr__(self, "window_trades", tuple(self.window_trades))
        if self.close <= 0:
            raise ValueError(f"{self.stock} {self.date}: close must be > 0")
        if self.vwap is not None and self.vwap <= 0:
            raise ValueError(f"{self.stock} {self.date}: vwap must be > 0")
        for price, volume in self.window_trades:
            if price <= 0 or volume < 0:
                raise ValueError(f"{self.stock} {self.date}: bad window trade ({price}, {volume})")
        if self.tradable and self.window_trades and not any(v > 0 for _, v in self.window_trades):
            raise ValueError(f"{self.stock} {self.date}: tradable day with zero window volume")


@functools.total_ordering
@dataclass(frozen=True)
class Money:
    """CNY amount, exact at 4 decimal places. Every operation re-quantizes half-even."""

    amount: Decimal = field(default=Decimal("0"))

    def __post_init__(self):
        amt = self.amount
        if not isinstance(amt, Decimal):
            amt = _to_decimal(amt)
        if not amt.is_finite():
            raise InvalidMoney(f"non-finite amount {amt!r}")
        object.__setattr__(self, "amount", amt.quantize(MONEY_SCALE, rounding=ROUND_HALF_EVEN))

    @classmethod
    def of(cls, value: Union[str, int, Decimal, "Money"]) -> "Money":
        if isinstance(value, Money):
            return value
        return cls(_to_decimal(value))

    @classmethod
    def zero(cls) -> "Money":
        return cls(Decimal("0"))

    def __add__(self, other: "Money") -> "Money":
        return Money(self.amount + Money.of(other).amount)

    def __sub__(self, other: "Money") -> "Money":
        return Money(self.amount - Money.of(other).amount)

    def __mul__(self, factor: Union[int, Decimal]) -> "Money":
        if isinstance(factor, float):
            raise InvalidMoney("refusing binary float multiplier")
        return Money(self.amount * factor)

    __rmul__ = __mul__

    def __neg__(self) -> "Money":
        return Money(-self.amount)

    def __lt__(self, other: "Money") -> bool:
        return self.amount < Money.of(other).amount

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Money):
            return self.amount == other.amount
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.amount)

    def __float__(self) -> float:
        return float(self.amount)

    def __str__(self) -> str:
        return f"{self.amount:.4f}"


def money_sum(values: Iterable[Money]) -> Money:
    """Left fold in the given order."""
    total = Money.zero()
    for v in values:
        total = total + v
    return total


def _to_decimal(value) -> Decimal:
    if isinstance(value, float):
        value = repr(value)
    try:
        return Decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise InvalidMoney(f"not a decimal amount: {value!r}") from None
