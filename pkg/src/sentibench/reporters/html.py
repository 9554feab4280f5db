import html
import pathlib
from typing import Mapping, Sequence

from ..metrics import CONVENTION_COLUMNS, REPORT_COLUMNS, MetricsReport

HTML_TMPL = '''<!doctype html>
<html><head><meta charset="utf-8"><title>Sentiment Factor Back-test</title>
<style>
body{font-family:Arial,Helvetica,sans-serif;margin:24px;color:#111}
h1{margin-bottom:0} .muted{color:#666} .section{margin:24px 0}
table{border-collapse:collapse} td,th{border:1px solid #ddd;padding:6px;text-align:right}
th:first-child,td:first-child{text-align:left}
.charts{display:grid;grid-template-columns:repeat(2,minmax(0,1fr));gap:16px}
figure{margin:0} figure img{max-width:100%;height:auto} figcaption{color:#666;font-size:90%}
</style></head><body>
<h1>{{title}}</h1>
<div class="muted">{{meta}}</div>
<div class="section">
  <h2>Metrics</h2>
  <table>
    <tr>{{head}}</tr>
    <tr>{{row}}</tr>
  </table>
</div>
{{sections}}
</body></html>'''


def _table(title, header, rows):
    head = "".join(f"<th>{html.escape(h)}</th>" for h in header)
    body = "".join("<tr>" + "".join(f"<td>{html.escape(str(c))}</td>" for c in r) + "</tr>" for r in rows)
    return f"<div class='section'><h2>{title}</h2><table><tr>{head}</tr>{body}</table></div>"


FIGURE_CAPTIONS = {
    "excess_returns.png": "Cumulative excess return over the benchmark",
    "net_returns.png": "Cumulative net asset return",
    "groups.png": "Excess return of each factor group, lowest factor first",
    "news_sources.png": "Share of news items by source",
}


def _figures(images):
    """Charts two per row; unknown files fall back to their name as caption."""
    cells = []
    for p in images:
        caption = html.escape(FIGURE_CAPTIONS.get(pathlib.PurePath(p).name, p))
        cells.append(f"<figure><img src='{html.escape(p)}' alt='{caption}' width='640'>"
                     f"<figcaption>{caption}</figcaption></figure>")
    return f"<div class='section'><h2>Charts</h2><div class='charts'>{''.join(cells)}</div></div>"


class HTMLReporter:
    def __init__(self, html_path: str | pathlib.Path):
        self.html_path = pathlib.Path(html_path)

    def emit(self, report: MetricsReport, images: Sequence[str] = (), sources: Mapping[str, float] | None = None,
             meta: str = "") -> pathlib.Path:
        row = {**report.as_row(), **report.conventions()}
        cols = list(REPORT_COLUMNS) + list(CONVENTION_COLUMNS)
        sections = []
        if sources:
            sections.append(_table("News sources", ["Source", "Share (%)"], [(s, f"{p:.2f}") for s, p in sources.items()]))
        if images:
            sections.append(_figures(images))
        page = (HTML_TMPL.replace("{{title}}", html.escape(f"Back-test: {report.factor_name}"))
                .replace("{{meta}}", html.escape(meta))
                .replace("{{head}}", "".join(f"<th>{html.escape(c)}</th>" for c in cols))
                .replace("{{row}}", "".join(f"<td>{html.escape(row[c])}</td>" for c in cols))
                .replace("{{sections}}", "".join(sections)))
        self.html_path.write_text(page, encoding="utf-8")
        return self.html_path
