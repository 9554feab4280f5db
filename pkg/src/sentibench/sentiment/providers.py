
from __future__ import annotations
import logging
import pathlib
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Protocol, Tuple

import pandas as pd

from ..errors import InvalidScore, MissingScore, SchemaError
from ..ingest import read_csv_table
from ..model import NewsRecord, ProviderKind, Scale
from .scores import (PromptResponseParser, SentimentScore, map_discrete, parse_label, wrap_continuous)

log = logging.getLogger(__name__)


class SentimentProvider(Protocol):
    kind: ProviderKind

    def score(self, record: NewsRecord) -> SentimentScore: ...


def score_from_raw(raw: str, kind: ProviderKind, parser: PromptResponseParser) -> SentimentScore:
    """Interpret one provider output (label, reply text, or probability) for ``kind``."""
    text = str(raw).strip()
    if kind is ProviderKind.CONTINUOUS_POSITIVE_PROB:
        try:
            p = float(text)
        except ValueError:
            raise InvalidScore(f"expected a probability, got {text!r}", operation="score_news") from None
        return wrap_continuous(p)
    try:
        numeric = float(text)
    except ValueError:
        numeric = None
    if numeric is not None:
        if numeric not in (-1.0, 0.0, 1.0):
            raise InvalidScore(f"discrete score must be -1, 0 or 1, got {text!r}", operation="score_news")
        return SentimentScore(numeric, Scale.SIGNED, kind)
    if kind is ProviderKind.DISCRETE_CLASSIFIER:
        label = parse_label(text)
        return SentimentScore(map_discrete(label).value, Scale.SIGNED, kind)
    try:
        label = parse_label(text)
    except InvalidScore:
        label = parser.parse(text)
    return SentimentScore(map_discrete(label).value, Scale.SIGNED, kind)


class InlineScoreProvider:
    """Uses the score already carried by each news row."""

    thread_safe = True

    def __init__(self, kind: ProviderKind, parser: Optional[PromptResponseParser] = None):
        self.kind = kind
        self.parser = parser or PromptResponseParser()

    def score(self, record: NewsRecord) -> SentimentScore:
        if record.provider and record.provider != self.kind.value:
            raise InvalidScore(f"{record.news_id}: row scored by {record.provider}, run expects {self.kind.value}",
                               location=record.news_id, operation="score_news")
        if record.score is None:
            raise MissingScore(record.news_id, source="news row")
        return score_from_raw(repr(record.score), self.kind, self.parser)


class OracleProvider:
    """File-backed oracle: news_id -> label_or_score for one provider kind."""

    thread_safe = True

    def __init__(self, path: str | pathlib.Path, kind: ProviderKind, parser: Optional[PromptResponseParser] = None):
        self.path = pathlib.Path(path)
        self.kind = kind
        self.parser = parser or PromptResponseParser()
        self._table = self._load()

    def _load(self) -> Dict[str, SentimentScore]:
        try:
            df = read_csv_table(self.path, "score_news")
        except pd.errors.EmptyDataError:
            raise SchemaError(str(self.path), "<header>", "score_news") from None
        for col in ("news_id", "label_or_score", "provider_kind"):
            if col not in df.columns:
                raise SchemaError(str(self.path), col, "score_news")
        table: Dict[str, SentimentScore] = {}
        rows = df[df["provider_kind"].str.strip() == self.kind.value]
        for news_id, raw in zip(rows["news_id"], rows["label_or_score"]):
            table[news_id.strip()] = score_from_raw(raw, self.kind, self.parser)
        log.info("oracle %s: %d %s score(s)", self.path.name, len(table), self.kind.value)
        return table

    def __len__(self) -> int:
        return len(self._table)

    def score(self, record: NewsRecord) -> SentimentScore:
        try:
            return self._table[record.news_id]
        except KeyError:
            raise MissingScore(record.news_id) from None


def score_news(ds, provider: SentimentProvider, *, workers: int = 1) -> List[Tuple[str, SentimentScore]]:
    """One score per record, in input order, whatever the execution order."""
    records = list(ds)
    if workers > 1 and getattr(provider, "thread_safe", False) and len(records) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(provider.score, records))
    else:
        scores = [provider.score(r) for r in records]
    return [(r.news_id, s) for r, s in zip(records, scores)]


def build_provider(cfg, transport=None) -> SentimentProvider:
    """Provider for a ``SentimentConfig``. Remote access only when explicitly enabled."""
    parser = PromptResponseParser.from_config(cfg.keywords)
    if cfg.provider == "oracle":
        return OracleProvider(cfg.oracle, cfg.kind, parser)
    if cfg.provider == "remote":
        from .remote import RemoteSentimentClient
        return RemoteSentimentClient.from_config(cfg.remote, cfg.kind, parser, transport=transport)
    return InlineScoreProvider(cfg.kind, parser)
