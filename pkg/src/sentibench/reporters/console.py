from typing import Mapping, Optional, Sequence

from rich.console import Console
from rich.table import Table

from ..metrics import CONVENTION_COLUMNS, REPORT_COLUMNS, MetricsReport
from .tables import best_cells


class ConsoleReporter:
    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def emit(self, report: MetricsReport) -> None:
        row = {**report.as_row(), **report.conventions()}
        t = Table(title=f"Back-test: {report.factor_name} ({report.days} days)")
        t.add_column("Metric")
        t.add_column("Value", justify="right")
        for col in REPORT_COLUMNS[1:] + CONVENTION_COLUMNS:
            t.add_row(col, row[col])
        self.console.print(t)

    def emit_comparison(self, rows: Sequence[Mapping[str, str]]) -> None:
        best = best_cells(rows)
        t = Table(title="Factor comparison (* = best in column)")
        for col in REPORT_COLUMNS:
            t.add_column(col, justify="left" if col == "Factor Name" else "right")
        for i, r in enumerate(rows):
            t.add_row(*[r.get(c, "") + ("*" if i in best.get(c, ()) else "") for c in REPORT_COLUMNS])
        self.console.print(t)

    def emit_sources(self, shares: Mapping[str, float], counts: Mapping[str, int]) -> None:
        t = Table(title="News sources")
        t.add_column("Source")
        t.add_column("Items", justify="right")
        t.add_column("Share (%)", justify="right")
        for src, pct in shares.items():
            t.add_row(src, str(counts[src]), f"{pct:.2f}")
        self.console.print(t)
