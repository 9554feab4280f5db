"""Sentiment score space: discrete labels, continuous probabilities, and the signed scale."""

from __future__ import annotations
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from ..errors import InvalidProbability, InvalidScore
from ..model import ProviderKind, Scale

log = logging.getLogger(__name__)


class DiscreteLabel(str, Enum):
    # prompt-style answers
    GOOD = "Good"
    NOT_SURE = "NotSure"
    BAD = "Bad"
    # classifier classes
    POSITIVE = "Positive"
    NEUTRAL = "Neutral"
    NEGATIVE = "Negative"

    @property
    def signed_value(self) -> float:
        return _SIGNED[self]

    @property
    def provider(self) -> ProviderKind:
        if self in (DiscreteLabel.GOOD, DiscreteLabel.NOT_SURE, DiscreteLabel.BAD):
            return ProviderKind.DISCRETE_THREE_CLASS
        return ProviderKind.DISCRETE_CLASSIFIER


_SIGNED = {
    DiscreteLabel.GOOD: 1.0, DiscreteLabel.NOT_SURE: 0.0, DiscreteLabel.BAD: -1.0,
    DiscreteLabel.POSITIVE: 1.0, DiscreteLabel.NEUTRAL: 0.0, DiscreteLabel.NEGATIVE: -1.0,
}

_LABEL_ALIASES = {
    "good": DiscreteLabel.GOOD, "good news": DiscreteLabel.GOOD,
    "notsure": DiscreteLabel.NOT_SURE, "not sure": DiscreteLabel.NOT_SURE,
    "bad": DiscreteLabel.BAD, "bad news": DiscreteLabel.BAD,
    "positive": DiscreteLabel.POSITIVE, "+1": DiscreteLabel.POSITIVE, "1": DiscreteLabel.POSITIVE,
    "neutral": DiscreteLabel.NEUTRAL, "0": DiscreteLabel.NEUTRAL,
    "negative": DiscreteLabel.NEGATIVE, "-1": DiscreteLabel.NEGATIVE,
}


def parse_label(raw: str) -> DiscreteLabel:
    """Strict label lookup (oracle files, classifier replies). Unknown text raises InvalidScore."""
    key = raw.strip().lower()
    if key in _LABEL_ALIASES:
        return _LABEL_ALIASES[key]
    raise InvalidScore(f"unknown sentiment label {raw!r}", operation="parse_label")


@dataclass(frozen=True)
class SentimentScore:
    value: float
    scale: Scale
    provider: ProviderKind

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvalidScore(f"non-finite score {self.value!r}")
        lo, hi = (-1.0, 1.0) if self.scale is Scale.SIGNED else (0.0, 1.0)
        if not lo <= self.value <= hi:
            raise InvalidScore(f"{self.value} outside {self.scale.value} range [{lo}, {hi}]")


def map_discrete(label: DiscreteLabel) -> SentimentScore:
    return SentimentScore(label.signed_value, Scale.SIGNED, label.provider)


def wrap_continuous(p_positive: float) -> SentimentScore:
    if not (isinstance(p_positive, (int, float)) and math.isfinite(p_positive) and 0.0 <= p_positive <= 1.0):
        raise InvalidProbability(f"positive probability must be within [0, 1], got {p_positive!r}")
    return SentimentScore(float(p_positive), Scale.UNIT, ProviderKind.CONTINUOUS_POSITIVE_PROB)


def to_signed(s: SentimentScore) -> SentimentScore:
    if s.scale is Scale.SIGNED:
        return s
    # clamp guards the float endpoints of 2v - 1
    return SentimentScore(min(1.0, max(-1.0, 2.0 * s.value - 1.0)), Scale.SIGNED, s.provider)


def signed_value(value: float, scale: Scale) -> float:
    return 2.0 * value - 1.0 if scale is Scale.UNIT else value


class PromptResponseParser:
    """Maps free-text prompt replies to GOOD / BAD / NOT SURE by keyword.

    The earliest keyword hit in the reply wins. Replies without any keyword are
    NOT SURE and counted in ``tally["unmatched"]``.
    """

    def __init__(self, good: Iterable[str] = ("GOOD NEWS",), bad: Iterable[str] = ("BAD NEWS",),
                 not_sure: Iterable[str] = ("NOT SURE", "UNKNOWN")):
        self._keywords = [(k.casefold(), DiscreteLabel.GOOD) for k in good if k]
        self._keywords += [(k.casefold(), DiscreteLabel.BAD) for k in bad if k]
        self._keywords += [(k.casefold(), DiscreteLabel.NOT_SURE) for k in not_sure if k]
        self.tally: Counter = Counter()

    @classmethod
    def from_config(cls, keywords) -> "PromptResponseParser":
        return cls(good=keywords.good, bad=keywords.bad, not_sure=keywords.not_sure)

    def parse(self, raw: Optional[str]) -> DiscreteLabel:
        text = (raw or "").casefold()
        best: Optional[tuple] = None
        for kw, label in self._keywords:
            pos = text.find(kw)
            # same start: longer keyword wins
            if pos >= 0 and (best is None or (pos, -len(kw)) < (best[0], -len(best[1]))):
                best = (pos, kw, label)
        if best is None:
            self.tally["unmatched"] += 1
            log.debug("no verdict keyword in reply %r; treating as NOT SURE", (raw or "")[:80])
            return DiscreteLabel.NOT_SURE
        self.tally[best[2].value] += 1
        return best[2]

    @property
    def unmatched(self) -> int:
        return self.tally["unmatched"]


_default_parser = PromptResponseParser()


def parse_prompt_response(raw: str, parser: Optional[PromptResponseParser] = None) -> DiscreteLabel:
    return (parser or _default_parser).parse(raw)
