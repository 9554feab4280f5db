import contextlib
import datetime as dt
import logging
import pathlib
from typing import List, Optional

import typer

from .config import RunConfig, load_config
from .errors import ConfigError, SentibenchError
from .fixtures import gen_fixture as write_synthetic
from .logging import setup_logging
from .reporters.console import ConsoleReporter
from .reporters.tables import load_returns, write_comparison
from .runners.runner import BacktestRunner, RunResult, compare_runs
from .utils.artifacts import new_run_dir
from .utils.plots import overlay_plot

app = typer.Typer(add_completion=False, help="sentibench - back-test news sentiment factors on daily A-share data")
log = logging.getLogger("sentibench")


@contextlib.contextmanager
def _structured_errors():
    """Any module error becomes one JSON line on stderr and a nonzero exit."""
    try:
        yield
    except ConfigError as e:
        typer.echo(e.to_line(), err=True)
        raise typer.Exit(code=2)
    except SentibenchError as e:
        typer.echo(e.to_line(), err=True)
        raise typer.Exit(code=1)
    except FileNotFoundError as e:
        err = SentibenchError(f"input file not found: {e.filename}", location=str(e.filename), operation="run")
        err.module = "cli"
        typer.echo(err.to_line(), err=True)
        raise typer.Exit(code=1)


def _with_format(cfg: RunConfig, fmt: Optional[str]) -> RunConfig:
    if fmt is None:
        return cfg
    if fmt not in ("csv", "json"):
        raise ConfigError(f"--format must be csv or json, got {fmt!r}", location="--format")
    return cfg.model_copy(update={"output": cfg.output.model_copy(update={"format": fmt})})


def _summary(result: RunResult) -> None:
    console = ConsoleReporter()
    if result.sources:
        console.emit_sources(result.sources, result.source_counts)
    if result.report is not None:
        console.emit(result.report)
    typer.echo(f"Done. Artifacts in {result.outdir}")


@app.command()
def run(
    config: str = typer.Option(..., "--config", "-c", help="Path to run config YAML"),
    output_dir: Optional[str] = typer.Option(None, "--out", "-o", help="Output directory (default artifacts/<factor>/<ts>)"),
    fmt: Optional[str] = typer.Option(None, "--format", "-f", help="Report format: csv or json (overrides config)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Score news (or import a factor panel), back-test, and write reports."""
    setup_logging("DEBUG" if verbose else None)
    with _structured_errors():
        cfg = _with_format(load_config(config), fmt)
        outdir = pathlib.Path(output_dir) if output_dir else new_run_dir(cfg.factor_name)
        result = BacktestRunner(cfg, outdir).run("run")
    _summary(result)


@app.command()
def score(
    config: str = typer.Option(..., "--config", "-c", help="Path to run config YAML"),
    output_dir: str = typer.Option(..., "--out", "-o", help="Output directory for factor_panel.csv"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Phase 1 only: score news and export the factor panel."""
    setup_logging("DEBUG" if verbose else None)
    with _structured_errors():
        cfg = load_config(config)
        if cfg.data.news is None:
            raise ConfigError("score needs data.news", location="data.news")
        result = BacktestRunner(cfg, output_dir).run("score")
    _summary(result)


@app.command("gen-fixture")
def gen_fixture(
    seed: int = typer.Option(42, "--seed", help="Any 64-bit integer"),
    stocks: int = typer.Option(5, "--stocks", min=1),
    days: int = typer.Option(10, "--days", min=1),
    plant_corr: float = typer.Option(0.0, "--plant-corr", min=-1.0, max=1.0,
                                     help="Correlation between news signal and same-day return"),
    output_dir: str = typer.Option(..., "--out", "-o"),
):
    """Write a reproducible synthetic dataset with ready-to-run configs."""
    setup_logging()
    paths = write_synthetic(seed, stocks, days, plant_corr, output_dir)
    for p in paths:
        typer.echo(p.as_posix())


@app.command()
def compare(
    run_dirs: List[str] = typer.Argument(..., help="Two or more completed run directories"),
    fmt: str = typer.Option("csv", "--format", "-f", help="Comparison file format: csv or json"),
    output_dir: Optional[str] = typer.Option(None, "--out", "-o", help="Write comparison table and overlay plots here"),
):
    """Side-by-side metrics of several runs; best value per column marked with *."""
    setup_logging()
    with _structured_errors():
        if len(run_dirs) < 2:
            raise ConfigError("compare needs at least 2 run directories", location="run_dirs")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {fmt!r}", location="--format")
        rows = compare_runs(run_dirs)
    ConsoleReporter().emit_comparison(rows)
    if output_dir:
        out = pathlib.Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_comparison(rows, out, fmt)
        _overlay(run_dirs, rows, out)
        typer.echo(f"Comparison written to {out}")


def _overlay(run_dirs: List[str], rows, out: pathlib.Path) -> None:
    excess, net = {}, {}
    for d, row in zip(run_dirs, rows):
        path = pathlib.Path(d) / "returns.csv"
        if not path.is_file():
            log.warning("%s has no returns.csv; left out of the overlay plots", d)
            continue
        series = load_returns(path)
        x = [dt.date.fromisoformat(s) for s in series["date"]]
        label = row["Factor Name"] if row["Factor Name"] not in excess else f"{row['Factor Name']} ({d})"
        excess[label] = (x, series["cumulative_excess"])
        net[label] = (x, series["cumulative_net"])
    if excess:
        overlay_plot(excess, "Cumulative excess return", "Date", "Excess return", (out / "excess_returns.png").as_posix())
        overlay_plot(net, "Cumulative net asset return", "Date", "Net return", (out / "net_returns.png").as_posix())


if __name__ == "__main__":
    app()
