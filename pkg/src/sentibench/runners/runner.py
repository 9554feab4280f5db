"""End-to-end pipeline: load, score, aggregate, back-test, measure, report.

A run is a fixed list of stages sharing one ``RunContext``. Each stage writes its
own artifacts and notes into a ``StageResult``; the manifest closes the run.
"""

from __future__ import annotations
import logging
import pathlib
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .. import __version__
from ..config import RunConfig
from ..engine import BacktestResult, export_ledger, export_nav, run_backtest
from ..factor import FactorPanel, aggregate_daily, carry_forward, coverage_summary, export_panel, holding_assignments, load_panel
from ..ingest import (NewsDataset, PriceDataset, filter_pre_open, load_benchmark, load_calendar, load_news, load_prices,
                      news_source_report)
from ..metrics import (GroupCurves, MetricsReport, benchmark_returns, build_report, excess_return_series,
                       group_excess_curves, portfolio_returns)
from ..model import TradingCalendar
from ..reporters.html import HTMLReporter
from ..reporters.tables import load_report_row, write_groups, write_report, write_returns, write_sources
from ..sentiment.providers import build_provider, score_news
from ..sentiment.scores import to_signed
from ..utils.artifacts import digest_inputs, list_outputs, write_json
from ..utils.plots import line_plot, source_share_plot

log = logging.getLogger(__name__)


@dataclass
class StageResult:
    id: str
    seconds: float = 0.0
    logs: List[str] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)


@dataclass
class RunContext:
    cfg: RunConfig
    outdir: pathlib.Path
    transport: Any = None
    calendar: Optional[TradingCalendar] = None
    benchmark: Dict = field(default_factory=dict)
    prices: Optional[PriceDataset] = None
    news: Optional[NewsDataset] = None
    panel: Optional[FactorPanel] = None
    backtest: Optional[BacktestResult] = None
    curves: Optional[GroupCurves] = None
    report: Optional[MetricsReport] = None
    sources: Dict[str, float] = field(default_factory=dict)
    source_counts: Dict[str, int] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def artifact(self, res: StageResult, name: str) -> pathlib.Path:
        res.artifacts.append(name)
        return self.outdir / name


@dataclass
class RunResult:
    command: str
    outdir: pathlib.Path
    stages: List[StageResult]
    report: Optional[MetricsReport] = None
    sources: Dict[str, float] = field(default_factory=dict)
    source_counts: Dict[str, int] = field(default_factory=dict)
    manifest: Optional[pathlib.Path] = None


class Stage:
    def __init__(self, id: str, func: Callable[[RunContext, StageResult], None]):
        self.id = id
        self.func = func

    def run(self, ctx: RunContext, res: StageResult):
        return self.func(ctx, res)


# ---------- stages ----------

def load_market(ctx: RunContext, res: StageResult) -> None:
    data = ctx.cfg.data
    ctx.calendar = load_calendar(data.calendar)
    ctx.benchmark = load_benchmark(data.benchmark, ctx.calendar)
    ctx.prices = load_prices(data.prices, calendar=ctx.calendar, benchmark=ctx.benchmark,
                             skip_bad_rows=data.skip_bad_rows)
    res.metrics.update(days=len(ctx.calendar), price_rows=ctx.prices.rows_read, synthesized=ctx.prices.synthesized,
                       stocks=len(ctx.prices.stocks()))
    ctx.diagnostics["prices"] = {"rows_read": ctx.prices.rows_read, "skipped": [str(i) for i in ctx.prices.issues],
                                 "synthesized_suspensions": ctx.prices.synthesized}


def load_calendar_only(ctx: RunContext, res: StageResult) -> None:
    ctx.calendar = load_calendar(ctx.cfg.data.calendar)
    res.metrics["days"] = len(ctx.calendar)


def build_factor(ctx: RunContext, res: StageResult) -> None:
    cfg = ctx.cfg
    if cfg.data.factor_panel is not None:
        ctx.panel = load_panel(cfg.data.factor_panel, ctx.calendar)
        res.logs.append(f"factor panel imported from {cfg.data.factor_panel.name}")
    else:
        ds = load_news(cfg.data.news, cfg.data.news_format, skip_bad_rows=cfg.data.skip_bad_rows)
        pre_open = filter_pre_open(ds)
        ctx.news = pre_open
        if len(ds):
            ctx.sources = news_source_report(ds)
            ctx.source_counts = dict(ds.source_histogram)
            write_sources(ctx.sources, ctx.source_counts, ctx.artifact(res, "news_sources.csv"))
            if cfg.output.plots:
                source_share_plot(ctx.sources, ctx.artifact(res, "news_sources.png").as_posix())
        provider = build_provider(cfg.sentiment, transport=ctx.transport)
        scored = score_news(pre_open, provider, workers=cfg.sentiment.workers)
        scores = [s for _, s in scored]
        if cfg.sentiment.signed:
            scores = [to_signed(s) for s in scores]
        ctx.panel = aggregate_daily(zip(pre_open.records, scores), ctx.calendar)
        parser = getattr(provider, "parser", None)
        ctx.diagnostics["news"] = {
            "rows_read": ds.rows_read, "skipped": [str(i) for i in ds.issues],
            "pre_open": len(pre_open), "after_open_dropped": len(ds) - len(pre_open),
            "unmatched_prompt_responses": parser.unmatched if parser is not None else 0,
        }
        res.metrics.update(news=len(ds), pre_open=len(pre_open))
    export_panel(ctx.panel, ctx.artifact(res, "factor_panel.csv"))
    ctx.diagnostics["factor"] = coverage_summary(ctx.panel, list(ctx.calendar))
    res.metrics["factor_values"] = len(ctx.panel)


def backtest(ctx: RunContext, res: StageResult) -> None:
    cfg = ctx.cfg
    trading_panel = carry_forward(ctx.panel, cfg.factor.carry_forward_days, ctx.calendar)
    ctx.backtest = run_backtest(trading_panel, ctx.prices, cfg.backtest)
    export_ledger(ctx.backtest.ledgers, ctx.artifact(res, "ledger.csv"))
    export_nav(ctx.backtest.ledgers, ctx.benchmark, ctx.artifact(res, "nav.csv"))
    ctx.diagnostics["sizing"] = ctx.backtest.diagnostics().as_dict()
    res.metrics["trades"] = sum(len(l.trades) for l in ctx.backtest.ledgers)


def groups(ctx: RunContext, res: StageResult) -> None:
    ledgers = ctx.backtest.ledgers
    k = ctx.cfg.backtest.group_count
    assignments = holding_assignments([(l.date, l.held) for l in ledgers], ctx.panel, ctx.calendar, k)
    ctx.curves = group_excess_curves(ledgers, assignments, ctx.prices, k=k)
    write_groups(ctx.curves, ctx.artifact(res, "groups.csv"))
    ctx.diagnostics["groups"] = {"k": k, "active_days": ctx.curves.active_days,
                                 "skipped_days": len(ledgers) - ctx.curves.active_days}
    if ctx.cfg.output.plots and ledgers:
        series = {f"Group {g}": ctx.curves.curves[g - 1] for g in range(1, k + 1)}
        line_plot(list(ctx.curves.dates), series, "Excess return by factor group", "Date", "Cumulative excess return",
                  ctx.artifact(res, "groups.png").as_posix())


def measure(ctx: RunContext, res: StageResult) -> None:
    cfg = ctx.cfg
    ledgers = ctx.backtest.ledgers
    ctx.report = build_report(ledgers, cfg.factor_name, cfg.metrics)
    write_report(ctx.report, ctx.outdir, cfg.output.format)
    res.artifacts.append(f"report.{cfg.output.format}")
    port, bench = portfolio_returns(ledgers), benchmark_returns(ledgers)
    excess = excess_return_series(port, bench)
    write_returns(port, bench, excess, ctx.artifact(res, "returns.csv"))
    if cfg.output.plots:
        dates = list(port.dates)
        line_plot(dates, {cfg.factor_name: excess.cumulative()}, "Cumulative excess return", "Date", "Excess return",
                  ctx.artifact(res, "excess_returns.png").as_posix())
        line_plot(dates, {cfg.factor_name: port.cumulative()}, "Cumulative net asset return", "Date", "Net return",
                  ctx.artifact(res, "net_returns.png").as_posix())
    res.metrics.update(ctx.report.as_row())


def html_report(ctx: RunContext, res: StageResult) -> None:
    images = [p for p in ("excess_returns.png", "net_returns.png", "groups.png", "news_sources.png")
              if (ctx.outdir / p).exists()]
    HTMLReporter(ctx.artifact(res, "report.html")).emit(ctx.report, images, ctx.sources,
                                                       meta=f"Generated by sentibench {__version__}")


class BacktestRunner:
    def __init__(self, cfg: RunConfig, outdir: str | pathlib.Path, transport=None):
        self.cfg = cfg
        self.outdir = pathlib.Path(outdir)
        self.transport = transport

    def stages(self, command: str = "run") -> List[Stage]:
        if command == "score":
            return [Stage("calendar", load_calendar_only), Stage("factor", build_factor)]
        stages = [Stage("market", load_market), Stage("factor", build_factor), Stage("backtest", backtest),
                  Stage("groups", groups), Stage("metrics", measure)]
        if self.cfg.output.html:
            stages.append(Stage("html", html_report))
        return stages

    def run(self, command: str = "run") -> RunResult:
        self.outdir.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        inputs = digest_inputs(self.cfg.data.inputs() + ([self.cfg.sentiment.oracle] if self.cfg.sentiment.oracle else []))
        ctx = RunContext(self.cfg, self.outdir, transport=self.transport)
        results: List[StageResult] = []
        for stage in self.stages(command):
            res = StageResult(id=stage.id)
            t0 = time.perf_counter()
            stage.run(ctx, res)
            res.seconds = time.perf_counter() - t0
            log.info("stage %-8s %.2fs %s", stage.id, res.seconds, ", ".join(res.artifacts))
            results.append(res)

        write_json(self.outdir / "diagnostics.json", ctx.diagnostics)
        manifest = write_json(self.outdir / "manifest.json", {
            "tool": "sentibench",
            "version": __version__,
            "command": command,
            "config": self.cfg.model_dump(mode="json"),
            "inputs": inputs,
            "duration_s": round(time.perf_counter() - started, 3),
            "outputs": list_outputs(self.outdir),
        })
        return RunResult(command, self.outdir, results, ctx.report, ctx.sources, ctx.source_counts, manifest)


def compare_runs(run_dirs: Sequence[str | pathlib.Path]) -> List[Dict[str, str]]:
    return [load_report_row(d) for d in run_dirs]
