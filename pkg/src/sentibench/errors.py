from __future__ import annotations
import json
from dataclasses import dataclass
from typing import Any, Optional, Sequence


class SentibenchError(Exception):
    """Base error. Carries where it happened so the CLI can print one structured line."""

    module: str = "sentibench"
    operation: str = ""

    def __init__(self, message: str, *, location: Optional[str] = None, operation: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.location = location
        if operation is not None:
            self.operation = operation

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": type(self).__name__,
            "module": self.module,
            "operation": self.operation,
            "location": self.location,
            "message": self.message,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------- core_model ----------
class MalformedStockId(SentibenchError, ValueError):
    module, operation = "core_model", "parse_stock_id"

    def __init__(self, raw: str, field: str, reason: str):
        super().__init__(f"malformed stock id {raw!r}: {field} {reason}", location=field)
        self.raw = raw
        self.field = field


class InvalidMoney(SentibenchError, ValueError):
    module, operation = "core_model", "Money"


class InvalidTimestamp(SentibenchError, ValueError):
    module, operation = "core_model", "MarketTimestamp.parse"


# ---------- ingest ----------
@dataclass(frozen=True)
class RowIssue:
    line: int
    field: str
    kind: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.kind} ({self.field}): {self.message}"


class SchemaError(SentibenchError, ValueError):
    module = "ingest"

    def __init__(self, path: str, column: str, operation: str):
        super().__init__(f"{path}: missing column {column!r}", location=path, operation=operation)
        self.column = column


class RowErrors(SentibenchError, ValueError):
    module = "ingest"

    def __init__(self, path: str, issues: Sequence[RowIssue], operation: str):
        self.issues = tuple(issues)
        head = "; ".join(str(i) for i in self.issues[:5])
        more = f" (+{len(self.issues) - 5} more)" if len(self.issues) > 5 else ""
        loc = f"{path}:{self.issues[0].line}" if self.issues else path
        super().__init__(f"{len(self.issues)} bad row(s): {head}{more}", location=loc, operation=operation)

    @property
    def lines(self) -> list[int]:
        return [i.line for i in self.issues]


class DuplicateNewsId(SentibenchError, ValueError):
    module, operation = "ingest", "load_news"

    def __init__(self, path: str, news_id: str, lines: Sequence[int]):
        self.news_id = news_id
        self.lines = list(lines)
        super().__init__(f"duplicate news_id {news_id!r} on lines {self.lines}", location=f"{path}:{self.lines[0]}")


class EmptyDataset(SentibenchError, ValueError):
    module, operation = "ingest", "news_source_report"


class BenchmarkGap(SentibenchError, ValueError):
    module, operation = "ingest", "load_benchmark"


# ---------- sentiment ----------
class InvalidProbability(SentibenchError, ValueError):
    module, operation = "sentiment", "wrap_continuous"


class InvalidScore(SentibenchError, ValueError):
    module, operation = "sentiment", "SentimentScore"


class MissingScore(SentibenchError, LookupError):
    module, operation = "sentiment", "score_news"

    def __init__(self, news_id: str, source: str = "oracle"):
        super().__init__(f"{source} has no score for news_id {news_id!r}", location=news_id)
        self.news_id = news_id


class ProviderUnavailable(SentibenchError, ConnectionError):
    """Remote transport failed after all retries. Safe to retry the whole call."""

    module, operation = "sentiment", "score_news"
    retriable = True

    def __init__(self, news_id: str, attempts: int, cause: Optional[BaseException] = None):
        super().__init__(f"remote provider failed for {news_id!r} after {attempts} attempt(s): {cause!r}", location=news_id)
        self.news_id = news_id
        self.attempts = attempts


# ---------- factor ----------
class MixedProviders(SentibenchError, ValueError):
    module, operation = "factor", "aggregate_daily"


class TooFewStocks(SentibenchError, ValueError):
    module, operation = "factor", "assign_groups"


class MissingFactor(SentibenchError, LookupError):
    module, operation = "factor", "assign_groups"


# ---------- engine ----------
class NoLiquidity(SentibenchError, ValueError):
    module, operation = "engine", "compute_vwap"


class ProtocolViolation(SentibenchError, RuntimeError):
    module, operation = "engine", "step_day"


class BacktestError(SentibenchError, RuntimeError):
    module, operation = "engine", "run_backtest"

    def __init__(self, day: str, cause: BaseException):
        inner = cause.message if isinstance(cause, SentibenchError) else repr(cause)
        super().__init__(f"{day}: {inner}", location=day)
        self.date = day
        self.cause = cause


# ---------- metrics ----------
class InvalidNav(SentibenchError, ValueError):
    module, operation = "metrics", "daily_returns"


class AlignmentError(SentibenchError, ValueError):
    module, operation = "metrics", "excess_return_series"


class DegenerateVariance(SentibenchError, ZeroDivisionError):
    module, operation = "metrics", "sharpe"


class EmptySeries(SentibenchError, ValueError):
    module = "metrics"


class MissingAssignment(SentibenchError, LookupError):
    module, operation = "metrics", "group_excess_curves"

    def __init__(self, stock: str, day: str):
        super().__init__(f"held stock {stock} has no group on {day}", location=f"{stock}@{day}")
        self.stock = stock
        self.date = day


# ---------- cli ----------
class ConfigError(SentibenchError, ValueError):
    module, operation = "cli", "load_config"


class MissingReport(SentibenchError, FileNotFoundError):
    module, operation = "cli", "compare"

    def __init__(self, run_dir: str, reason: str = "no report found"):
        super().__init__(f"{reason} in {run_dir}", location=run_dir)
        self.dir = run_dir
