
from __future__ import annotations
import pathlib
from decimal import Decimal
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .model import ProviderKind


def _decimal_from_yaml(v):
    # YAML floats would carry binary noise into Decimal; go through repr
    if isinstance(v, float):
        return Decimal(repr(v))
    return v


class BacktestConfig(BaseModel):
    model_config = {"extra": "forbid", "frozen": True}

    max_buys_per_day: int = Field(500, ge=0)
    max_sells_per_day: int = Field(500, ge=0)
    turnover_cap: Decimal = Field(Decimal("1.0"), description="fraction of nav_open, one-sided")
    fee_rate: Decimal = Field(Decimal("0.0015"), description="fraction of transaction value")
    buy_threshold: float = Field(0.0, description="signed factor strictly above which a stock is a buy candidate")
    sell_threshold: float = Field(0.0, description="signed factor at or below which a held stock is a sell candidate")
    initial_cash: Decimal = Field(Decimal("10000000"))
    lot_size: int = Field(100, ge=1)
    group_count: int = Field(3, ge=2)
    stamp_duty_rate: Decimal = Field(Decimal("0.001"), description="part of fee_rate that is stamp duty")
    stamp_duty_sell_only: bool = Field(False, description="charge stamp duty on sells only")

    @field_validator("turnover_cap", "fee_rate", "initial_cash", "stamp_duty_rate", mode="before")
    @classmethod
    def _as_decimal(cls, v):
        return _decimal_from_yaml(v)

    @model_validator(mode="after")
    def _check(self) -> "BacktestConfig":
        if not (Decimal(0) < self.fee_rate < Decimal(1)):
            raise ValueError(f"fee_rate must be in (0, 1), got {self.fee_rate}")
        if not (Decimal(0) < self.turnover_cap <= Decimal(1)):
            raise ValueError(f"turnover_cap must be in (0, 1], got {self.turnover_cap}")
        if self.buy_threshold < self.sell_threshold:
            raise ValueError("buy_threshold must be >= sell_threshold")
        if self.initial_cash < 0:
            raise ValueError("initial_cash must be >= 0")
        if not (Decimal(0) <= self.stamp_duty_rate <= self.fee_rate):
            raise ValueError("stamp_duty_rate must be within [0, fee_rate]")
        return self

    def buy_fee_rate(self) -> Decimal:
        if self.stamp_duty_sell_only:
            return self.fee_rate - self.stamp_duty_rate
        return self.fee_rate

    def sell_fee_rate(self) -> Decimal:
        return self.fee_rate


class KeywordConfig(BaseModel):
    good: List[str] = Field(default_factory=lambda: ["GOOD NEWS", "利好"])
    bad: List[str] = Field(default_factory=lambda: ["BAD NEWS", "利空"])
    not_sure: List[str] = Field(default_factory=lambda: ["NOT SURE", "UNKNOWN", "不确定"])


class RemoteConfig(BaseModel):
    enabled: bool = Field(False, description="remote calls are never made unless this is set")
    endpoint: Optional[str] = Field(None, description="tcp://host:port")
    timeout_s: float = Field(5.0, gt=0)
    max_retries: int = Field(2, ge=0)
    prompt_template: str = Field(
        "Forget all your previous instructions. Pretend you are a financial expert. "
        "Is this news GOOD NEWS, BAD NEWS, or NOT SURE for the stock price of {stock} in the short term? "
        "Answer with one of GOOD NEWS, BAD NEWS or NOT SURE on the first line. News: {text}"
    )


class SentimentConfig(BaseModel):
    provider: Literal["inline", "oracle", "remote"] = "inline"
    kind: ProviderKind = ProviderKind.CONTINUOUS_POSITIVE_PROB
    oracle: Optional[pathlib.Path] = None
    signed: bool = Field(False, description="map Unit scores to the Signed scale before aggregation")
    workers: int = Field(1, ge=1)
    keywords: KeywordConfig = Field(default_factory=KeywordConfig)
    remote: RemoteConfig = Field(default_factory=RemoteConfig)

    @model_validator(mode="after")
    def _check(self) -> "SentimentConfig":
        if self.provider == "oracle" and self.oracle is None:
            raise ValueError("sentiment.oracle is required for provider 'oracle'")
        if self.provider == "remote":
            if not self.remote.enabled:
                raise ValueError("provider 'remote' requires sentiment.remote.enabled: true")
            if not self.remote.endpoint:
                raise ValueError("sentiment.remote.endpoint is required")
        return self


class DataConfig(BaseModel):
    news: Optional[pathlib.Path] = None
    news_format: Literal["csv", "jsonl"] = "csv"
    prices: pathlib.Path
    benchmark: pathlib.Path
    calendar: pathlib.Path
    factor_panel: Optional[pathlib.Path] = None
    skip_bad_rows: bool = False

    @model_validator(mode="after")
    def _check(self) -> "DataConfig":
        if self.news is None and self.factor_panel is None:
            raise ValueError("one of data.news or data.factor_panel is required")
        return self

    def inputs(self) -> List[pathlib.Path]:
        paths = [self.calendar, self.benchmark, self.prices, self.news, self.factor_panel]
        return [p for p in paths if p is not None]


class FactorConfig(BaseModel):
    carry_forward_days: int = Field(5, ge=0)


class MetricsConfig(BaseModel):
    risk_free_rate: float = Field(0.0, gt=-100.0, description="%/yr")
    trading_days_per_year: int = Field(243, gt=0)
    excess_mode: Literal["active", "difference"] = "active"
    drawdown_basis: Literal["net", "excess"] = "net"


class OutputConfig(BaseModel):
    format: Literal["csv", "json"] = "csv"
    plots: bool = True
    html: bool = True


class RunConfig(BaseModel):
    factor_name: str = Field("factor", min_length=1)
    data: DataConfig
    sentiment: SentimentConfig = Field(default_factory=SentimentConfig)
    factor: FactorConfig = Field(default_factory=FactorConfig)
    backtest: BacktestConfig = Field(default_factory=BacktestConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def resolved(self, base: pathlib.Path) -> "RunConfig":
        """Anchor relative data paths at ``base`` (the config file's directory)."""
        def fix(p: Optional[pathlib.Path]) -> Optional[pathlib.Path]:
            if p is None or p.is_absolute():
                return p
            return (base / p).resolve()

        data = self.data.model_copy(update={k: fix(getattr(self.data, k)) for k in
                                            ("news", "prices", "benchmark", "calendar", "factor_panel")})
        sentiment = self.sentiment.model_copy(update={"oracle": fix(self.sentiment.oracle)})
        return self.model_copy(update={"data": data, "sentiment": sentiment})


def load_config(path: str | pathlib.Path) -> RunConfig:
    p = pathlib.Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}", location=str(p)) from None
    except UnicodeDecodeError as e:
        raise ConfigError(f"config is not UTF-8 text (byte {e.start})", location=str(p)) from None
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}", location=str(p)) from None
    try:
        cfg = RunConfig.model_validate(data or {})
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first.get("loc", ()))
        raise ConfigError(f"{where or 'config'}: {first.get('msg')}", location=f"{p}:{where}") from None
    return cfg.resolved(p.parent.resolve())
