"""Flat-file loaders for news, prices, benchmark and calendar.

Loaders are strict by default: every bad row is collected and reported in one
``RowErrors``. With ``skip_bad_rows`` the same rows are dropped, logged, and kept
on the returned dataset's ``issues`` so that rows read == records + issues.
"""

from __future__ import annotations
import datetime as dt
import io
import logging
import math
import pathlib
import re
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .errors import (BenchmarkGap, DuplicateNewsId, EmptyDataset, InvalidTimestamp, MalformedStockId,
                     RowErrors, RowIssue, SchemaError)
from .model import DailyPriceRecord, MarketTimestamp, NewsRecord, StockId, TradingCalendar, is_pre_open, parse_stock_id

log = logging.getLogger(__name__)

NEWS_REQUIRED = ("news_id", "stock_id", "timestamp", "source")
NEWS_OPTIONAL = ("text", "score", "provider")
PRICE_REQUIRED = ("stock_id", "date", "close", "tradable")
VWAP_COLUMN = "vwap_0930_0935"
WINDOW_MINUTES = 5


@dataclass(frozen=True)
class NewsDataset:
    records: Tuple[NewsRecord, ...]
    issues: Tuple[RowIssue, ...] = ()
    rows_read: Optional[int] = None
    source_histogram: Dict[str, int] = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "issues", tuple(self.issues))
        object.__setattr__(self, "source_histogram", dict(Counter(r.source for r in self.records)))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class PriceDataset:
    records: Mapping[Tuple[StockId, dt.date], DailyPriceRecord]
    calendar: TradingCalendar
    benchmark: Mapping[dt.date, float]
    issues: Tuple[RowIssue, ...] = ()
    rows_read: Optional[int] = None
    synthesized: int = 0
    _by_date: Dict[dt.date, Dict[StockId, DailyPriceRecord]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        missing = [d for d in self.calendar if d not in self.benchmark]
        if missing:
            raise BenchmarkGap(f"benchmark has no level for {len(missing)} calendar date(s), first {missing[0]}",
                               location=missing[0].isoformat())
        by_date: Dict[dt.date, Dict[StockId, DailyPriceRecord]] = {d: {} for d in self.calendar}
        for (stock, d), rec in sorted(self.records.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            if d not in by_date:
                raise ValueError(f"price record dated {d} is not in the trading calendar")
            by_date[d][stock] = rec
        object.__setattr__(self, "_by_date", by_date)

    def get(self, stock: StockId, d: dt.date) -> Optional[DailyPriceRecord]:
        return self._by_date.get(d, {}).get(stock)

    def on(self, d: dt.date) -> Dict[StockId, DailyPriceRecord]:
        return self._by_date.get(d, {})

    def stocks(self) -> List[StockId]:
        return sorted({s for s, _ in self.records})

    def benchmark_return(self, d: dt.date) -> float:
        """Index return into ``d``; 0.0 on the first calendar date."""
        prev = self.calendar.previous_date(d)
        if prev is None:
            return 0.0
        return self.benchmark[d] / self.benchmark[prev] - 1.0


# ---------- helpers ----------

_PARSER_LINE = re.compile(r"line (\d+)")


def read_text(path: str | pathlib.Path, operation: str) -> str:
    """Whole file as UTF-8 text; a bad byte becomes a RowErrors on the line holding it."""
    path = pathlib.Path(path)
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw.count(b"\n", 0, e.start) + 1
        issue = RowIssue(line, "<encoding>", "BadEncoding", f"byte offset {e.start}: {e.reason}")
        raise RowErrors(str(path), [issue], operation) from None


def read_csv_table(path: str | pathlib.Path, operation: str, **kwargs) -> pd.DataFrame:
    """CSV with every cell as str. Tokenizer failures (wrong field count) become RowErrors."""
    text = read_text(path, operation)
    try:
        return pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, **kwargs)
    except pd.errors.ParserError as e:
        msg = " ".join(str(e).split())
        m = _PARSER_LINE.search(msg)
        issue = RowIssue(int(m.group(1)) if m else 0, "<row>", "BadFieldCount", msg)
        raise RowErrors(str(path), [issue], operation) from None


def _read_frame(path: pathlib.Path, fmt: str, operation: str) -> Tuple[pd.DataFrame, int]:
    """Return the frame (all cells as str) and the file line number of its first data row."""
    if fmt == "csv":
        try:
            df = read_csv_table(path, operation, skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise SchemaError(str(path), "<header>", operation) from None
        return df, 2
    if fmt == "jsonl":
        text = read_text(path, operation)
        try:
            df = pd.read_json(io.StringIO(text), lines=True, dtype=False, convert_dates=False)
        except ValueError as e:
            raise RowErrors(str(path), [RowIssue(0, "<json>", "BadJson", str(e))], operation) from None
        df = df.map(_cell_text) if hasattr(df, "map") else df.applymap(_cell_text)
        return df, 1
    raise ValueError(f"unknown news format {fmt!r}")


def _cell_text(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return str(v)


def _require(df: pd.DataFrame, path: pathlib.Path, columns: Iterable[str], operation: str) -> None:
    for col in columns:
        if col not in df.columns:
            raise SchemaError(str(path), col, operation)


def _decimal(raw: str) -> Decimal:
    try:
        val = Decimal(raw.strip())
    except (InvalidOperation, AttributeError):
        raise ValueError(f"not a number: {raw!r}") from None
    if not val.is_finite():
        raise ValueError(f"not finite: {raw!r}")
    return val


def _finish(path: pathlib.Path, issues: List[RowIssue], skip_bad_rows: bool, operation: str) -> None:
    if not issues:
        return
    if not skip_bad_rows:
        raise RowErrors(str(path), issues, operation)
    for issue in issues:
        log.warning("%s: skipped %s", path.name, issue)


# ---------- news ----------

def load_news(path: str | pathlib.Path, fmt: str = "csv", *, skip_bad_rows: bool = False) -> NewsDataset:
    path = pathlib.Path(path)
    df, first_line = _read_frame(path, fmt.lower(), "load_news")
    _require(df, path, NEWS_REQUIRED, "load_news")
    cols = {c: (c in df.columns) for c in NEWS_OPTIONAL}

    records: List[NewsRecord] = []
    record_lines: List[int] = []
    issues: List[RowIssue] = []
    for offset, row in enumerate(df.to_dict("records")):
        line = first_line + offset
        rec = _news_row(row, line, cols, issues)
        if rec is not None:
            records.append(rec)
            record_lines.append(line)

    seen: Dict[str, List[int]] = {}
    for rec, line in zip(records, record_lines):
        seen.setdefault(rec.news_id, []).append(line)
    dups = {nid: lines for nid, lines in seen.items() if len(lines) > 1}
    if dups and not skip_bad_rows:
        nid, lines = next(iter(dups.items()))
        raise DuplicateNewsId(str(path), nid, lines)
    if dups:
        kept, first_seen = [], set()
        for rec, line in zip(records, record_lines):
            if rec.news_id in first_seen:
                issues.append(RowIssue(line, "news_id", "DuplicateNewsId", f"{rec.news_id!r} first seen on line {dups[rec.news_id][0]}"))
                continue
            first_seen.add(rec.news_id)
            kept.append(rec)
        records = kept

    issues.sort(key=lambda i: i.line)
    _finish(path, issues, skip_bad_rows, "load_news")
    log.info("loaded %d news record(s) from %s (%d skipped)", len(records), path.name, len(issues))
    return NewsDataset(records=records, issues=issues, rows_read=len(df))


def _news_row(row: Mapping[str, str], line: int, cols: Mapping[str, bool], issues: List[RowIssue]) -> Optional[NewsRecord]:
    before = len(issues)
    news_id = row["news_id"].strip()
    if not news_id:
        issues.append(RowIssue(line, "news_id", "MissingField", "news_id is empty"))
    stock = None
    if not row["stock_id"].strip():
        issues.append(RowIssue(line, "stock_id", "MissingField", "stock_id is empty"))
    else:
        try:
            stock = parse_stock_id(row["stock_id"])
        except MalformedStockId as e:
            issues.append(RowIssue(line, "stock_id", "MalformedStockId", e.message))
    ts = None
    if not row["timestamp"].strip():
        issues.append(RowIssue(line, "timestamp", "MissingField", "timestamp is empty"))
    else:
        try:
            ts = MarketTimestamp.parse(row["timestamp"])
        except InvalidTimestamp as e:
            issues.append(RowIssue(line, "timestamp", "BadTimestamp", e.message))
    text = row.get("text", "") if cols["text"] else ""
    score_raw = row.get("score", "").strip() if cols["score"] else ""
    score = None
    if score_raw:
        try:
            score = float(score_raw)
            if not math.isfinite(score):
                raise ValueError
        except ValueError:
            issues.append(RowIssue(line, "score", "BadScore", f"not a finite number: {score_raw!r}"))
    if not text and not score_raw:
        issues.append(RowIssue(line, "text", "MissingPayload", "one of text/score is required"))
    if len(issues) > before:
        return None
    provider = (row.get("provider", "") if cols["provider"] else "").strip() or None
    return NewsRecord(news_id=news_id, stock=stock, timestamp=ts, source=row["source"].strip(),
                      text=text or None, score=score, provider=provider)


def filter_pre_open(ds: NewsDataset) -> NewsDataset:
    kept = [r for r in ds.records if is_pre_open(r.timestamp)]
    log.debug("pre-open filter kept %d of %d news record(s)", len(kept), len(ds.records))
    return NewsDataset(records=kept, issues=ds.issues, rows_read=ds.rows_read)


def news_source_report(ds: NewsDataset) -> Dict[str, float]:
    """Share of records per source, in percent, largest first."""
    if not ds.records:
        raise EmptyDataset("no news records to summarize")
    total = len(ds.records)
    ordered = sorted(ds.source_histogram.items(), key=lambda kv: (-kv[1], kv[0]))
    return {src: 100.0 * n / total for src, n in ordered}


# ---------- calendar / benchmark ----------

def load_calendar(path: str | pathlib.Path) -> TradingCalendar:
    path = pathlib.Path(path)
    try:
        df = read_csv_table(path, "load_calendar", header=None)
    except pd.errors.EmptyDataError:
        return TradingCalendar(())
    cells = [str(v).strip() for v in df.iloc[:, 0]]
    start = 1 if cells and cells[0].lower() == "date" else 0
    dates, issues = [], []
    for i, cell in enumerate(cells[start:], start=start + 1):
        try:
            d = dt.date.fromisoformat(cell)
        except ValueError:
            issues.append(RowIssue(i, "date", "BadDate", f"not an ISO date: {cell!r}"))
            continue
        if dates and d <= dates[-1]:
            issues.append(RowIssue(i, "date", "NotAscending", f"{d} does not follow {dates[-1]}"))
            continue
        dates.append(d)
    _finish(path, issues, False, "load_calendar")
    return TradingCalendar(tuple(dates))


def load_benchmark(path: str | pathlib.Path, calendar: TradingCalendar) -> Dict[dt.date, float]:
    path = pathlib.Path(path)
    df, first_line = _read_frame(path, "csv", "load_benchmark")
    _require(df, path, ("date", "index_level"), "load_benchmark")
    levels: Dict[dt.date, float] = {}
    issues: List[RowIssue] = []
    for offset, row in enumerate(df.to_dict("records")):
        line = first_line + offset
        try:
            d = dt.date.fromisoformat(row["date"].strip())
        except ValueError:
            issues.append(RowIssue(line, "date", "BadDate", f"not an ISO date: {row['date']!r}"))
            continue
        if d not in calendar:
            issues.append(RowIssue(line, "date", "DateNotInCalendar", f"{d} is not a trading date"))
            continue
        try:
            level = float(row["index_level"])
        except ValueError:
            issues.append(RowIssue(line, "index_level", "BadNumber", f"{row['index_level']!r}"))
            continue
        if not math.isfinite(level) or level <= 0:
            issues.append(RowIssue(line, "index_level", "NonPositivePrice", f"index level must be > 0, got {level}"))
            continue
        levels[d] = level
    _finish(path, issues, False, "load_benchmark")
    missing = [d for d in calendar if d not in levels]
    if missing:
        raise BenchmarkGap(f"{path.name}: no index level for {missing[0]} ({len(missing)} date(s) missing)",
                           location=f"{path}:{missing[0].isoformat()}")
    return levels


# ---------- prices ----------

def load_prices(path: str | pathlib.Path, *, calendar: TradingCalendar, benchmark: Mapping[dt.date, float],
                skip_bad_rows: bool = False) -> PriceDataset:
    path = pathlib.Path(path)
    df, first_line = _read_frame(path, "csv", "load_prices")
    _require(df, path, PRICE_REQUIRED, "load_prices")
    window_cols = [(f"w{i}_price", f"w{i}_volume") for i in range(1, WINDOW_MINUTES + 1)]
    has_windows = all(p in df.columns and v in df.columns for p, v in window_cols)
    has_vwap = VWAP_COLUMN in df.columns

    records: Dict[Tuple[StockId, dt.date], DailyPriceRecord] = {}
    issues: List[RowIssue] = []
    for offset, row in enumerate(df.to_dict("records")):
        line = first_line + offset
        rec = _price_row(row, line, calendar, has_vwap, window_cols if has_windows else (), issues)
        if rec is None:
            continue
        key = (rec.stock, rec.date)
        if key in records:
            issues.append(RowIssue(line, "stock_id", "DuplicateKey", f"second record for {rec.stock} on {rec.date}"))
            continue
        records[key] = rec

    _finish(path, issues, skip_bad_rows, "load_prices")
    loaded = len(records)
    synthesized = _fill_suspensions(records, calendar)
    log.info("loaded %d price row(s) from %s; %d suspended day(s) synthesized, %d skipped",
             loaded, path.name, synthesized, len(issues))
    return PriceDataset(records=records, calendar=calendar, benchmark=dict(benchmark), issues=tuple(issues),
                        rows_read=len(df), synthesized=synthesized)


def _price_row(row: Mapping[str, str], line: int, calendar: TradingCalendar, has_vwap: bool,
               window_cols: Sequence[Tuple[str, str]], issues: List[RowIssue]) -> Optional[DailyPriceRecord]:
    before = len(issues)
    try:
        stock = parse_stock_id(row["stock_id"])
    except MalformedStockId as e:
        issues.append(RowIssue(line, "stock_id", "MalformedStockId", e.message))
        stock = None
    try:
        d = dt.date.fromisoformat(row["date"].strip())
        if d not in calendar:
            issues.append(RowIssue(line, "date", "DateNotInCalendar", f"{d} is not a trading date"))
    except ValueError:
        issues.append(RowIssue(line, "date", "BadDate", f"not an ISO date: {row['date']!r}"))
        d = None
    close = _positive(row["close"], line, "close", issues)
    flag = row["tradable"].strip()
    if flag not in ("0", "1"):
        issues.append(RowIssue(line, "tradable", "BadFlag", f"expected 0 or 1, got {flag!r}"))
    tradable = flag == "1"

    vwap = None
    if has_vwap and row[VWAP_COLUMN].strip():
        vwap = _positive(row[VWAP_COLUMN], line, VWAP_COLUMN, issues)
    window: List[Tuple[Decimal, int]] = []
    for pcol, vcol in window_cols:
        if not row[pcol].strip() and not row[vcol].strip():
            continue
        price = _positive(row[pcol], line, pcol, issues)
        try:
            volume = int(row[vcol].strip())
            if volume < 0:
                raise ValueError
        except ValueError:
            issues.append(RowIssue(line, vcol, "BadVolume", f"volume must be an integer >= 0, got {row[vcol]!r}"))
            continue
        if price is not None:
            window.append((price, volume))
    if vwap is not None and window:
        issues.append(RowIssue(line, VWAP_COLUMN, "AmbiguousFill", "both vwap and window trades given"))
    if tradable and vwap is None and not window and len(issues) == before:
        issues.append(RowIssue(line, VWAP_COLUMN, "MissingFill", "tradable row needs vwap or window trades"))
    if len(issues) > before:
        return None
    if tradable and window and not any(v > 0 for _, v in window):
        log.warning("line %d: %s %s has no volume in the opening window; marked non-tradable", line, stock, d)
        tradable = False
    return DailyPriceRecord(stock=stock, date=d, close=close, tradable=tradable, window_trades=tuple(window), vwap=vwap)


def _positive(raw: str, line: int, column: str, issues: List[RowIssue]) -> Optional[Decimal]:
    try:
        val = _decimal(raw)
    except ValueError as e:
        issues.append(RowIssue(line, column, "BadNumber", str(e)))
        return None
    if val <= 0:
        issues.append(RowIssue(line, column, "NonPositivePrice", f"{column} must be > 0, got {val}"))
        return None
    return val


def _fill_suspensions(records: Dict[Tuple[StockId, dt.date], DailyPriceRecord], calendar: TradingCalendar) -> int:
    """From each stock's first row to the calendar end, add non-tradable rows on missing dates."""
    first: Dict[StockId, int] = {}
    for stock, d in records:
        i = calendar.index(d)
        first[stock] = min(i, first.get(stock, i))
    added = 0
    for stock in sorted(first):
        last_close = None
        for d in calendar.dates[first[stock]:]:
            rec = records.get((stock, d))
            if rec is not None:
                last_close = rec.close
                continue
            records[(stock, d)] = DailyPriceRecord(stock=stock, date=d, close=last_close, tradable=False)
            added += 1
    return added
