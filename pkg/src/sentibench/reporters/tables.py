"""Table-shaped artifacts: the metrics report, plot-ready series, and run comparison."""

from __future__ import annotations
import csv
import json
import pathlib
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np

from ..errors import MissingReport
from ..metrics import CONVENTION_COLUMNS, REPORT_COLUMNS, GroupCurves, MetricsReport, ReturnSeries
from ..utils.artifacts import write_json

# column -> True when higher is better; columns absent here are never highlighted
BEST_DIRECTION = {
    "Annual Excess Return (%)": True,
    "Annual Net Asset Return (%)": True,
    "Win Rate (%)": True,
    "Sharpe Ratio": True,
    "Max Withdrawal Rate": False,
    "Turn-over Ratio (%)": False,
}


def _write_csv(path: pathlib.Path, header: Sequence[str], rows: Iterable[Sequence]) -> pathlib.Path:
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_report(report: MetricsReport, outdir: pathlib.Path, fmt: str = "csv") -> pathlib.Path:
    row = {**report.as_row(), **report.conventions()}
    if fmt == "json":
        return write_json(outdir / "report.json", {"row": row, "values": report.as_dict()})
    header = list(REPORT_COLUMNS) + list(CONVENTION_COLUMNS)
    return _write_csv(outdir / "report.csv", header, [[row[c] for c in header]])


def load_report_row(run_dir: str | pathlib.Path) -> Dict[str, str]:
    run_dir = pathlib.Path(run_dir)
    js, cs = run_dir / "report.json", run_dir / "report.csv"
    try:
        if js.is_file():
            return {k: str(v) for k, v in json.loads(js.read_text(encoding="utf-8"))["row"].items()}
        if cs.is_file():
            with cs.open(newline="", encoding="utf-8") as f:
                rows = list(csv.DictReader(f))
            if rows:
                return rows[0]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError, AttributeError):
        raise MissingReport(str(run_dir), "unreadable report") from None
    raise MissingReport(str(run_dir))


def best_cells(rows: Sequence[Mapping[str, str]]) -> Dict[str, set]:
    """Row indices holding the best value of each ranked column (all of them on ties)."""
    best: Dict[str, set] = {}
    for col, higher in BEST_DIRECTION.items():
        vals = [(i, float(r[col])) for i, r in enumerate(rows) if r.get(col, "") not in ("", "nan")]
        if not vals:
            continue
        target = max(v for _, v in vals) if higher else min(v for _, v in vals)
        best[col] = {i for i, v in vals if v == target}
    return best


def write_comparison(rows: Sequence[Mapping[str, str]], outdir: pathlib.Path, fmt: str = "csv") -> pathlib.Path:
    if fmt == "json":
        return write_json(outdir / "comparison.json", {"columns": list(REPORT_COLUMNS),
                                                        "rows": [{c: r.get(c, "") for c in REPORT_COLUMNS} for r in rows]})
    return _write_csv(outdir / "comparison.csv", REPORT_COLUMNS, [[r.get(c, "") for c in REPORT_COLUMNS] for r in rows])


def write_returns(port: ReturnSeries, bench: ReturnSeries, excess: ReturnSeries, path: pathlib.Path) -> pathlib.Path:
    cum_excess, cum_net = excess.cumulative(), port.cumulative()
    rows = [[d.isoformat(), repr(float(p)), repr(float(b)), repr(float(e)), repr(float(ce)), repr(float(cn))]
            for d, p, b, e, ce, cn in zip(port.dates, port.values, bench.values, excess.values, cum_excess, cum_net)]
    header = ["date", "portfolio_return", "benchmark_return", "excess_return", "cumulative_excess", "cumulative_net"]
    return _write_csv(path, header, rows)


def load_returns(path: pathlib.Path) -> Dict[str, List]:
    with path.open(newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return {"date": [r["date"] for r in rows],
            "cumulative_excess": [float(r["cumulative_excess"]) for r in rows],
            "cumulative_net": [float(r["cumulative_net"]) for r in rows]}


def write_groups(curves: GroupCurves, path: pathlib.Path) -> pathlib.Path:
    header = ["date"] + [f"group_{g}" for g in range(1, curves.k + 1)]
    data = np.asarray(curves.curves, dtype=float).reshape(curves.k, len(curves.dates))
    rows = [[d.isoformat()] + [repr(float(v)) for v in data[:, i]] for i, d in enumerate(curves.dates)]
    return _write_csv(path, header, rows)


def write_sources(shares: Mapping[str, float], counts: Mapping[str, int], path: pathlib.Path) -> pathlib.Path:
    rows = [[src, counts[src], f"{pct:.2f}"] for src, pct in shares.items()]
    return _write_csv(path, ["source", "count", "share_pct"], rows)
