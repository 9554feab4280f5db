import csv
import json
import pathlib
import shutil

import pytest
import yaml
from typer.testing import CliRunner

from sentibench.cli import app
from sentibench.metrics import REPORT_COLUMNS

DATA = pathlib.Path(__file__).parent / "data" / "five_stock"
runner = CliRunner()


@pytest.fixture
def data_dir(tmp_path):
    # config paths resolve against the config file, so copy the whole set
    dst = tmp_path / "five_stock"
    shutil.copytree(DATA, dst)
    return dst


def _error(result):
    line = next(l for l in result.output.splitlines() if l.startswith('{"error"'))
    return json.loads(line)


def _run(config, out, *extra):
    return runner.invoke(app, ["run", "--config", str(config), "--out", str(out), *extra])


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.is_file() and p.name != "manifest.json" and p.suffix != ".png"}


def test_run_writes_artifacts(data_dir, tmp_path):
    out = tmp_path / "run"
    result = _run(data_dir / "config.yaml", out)
    assert result.exit_code == 0, result.output
    for name in ("factor_panel.csv", "ledger.csv", "nav.csv", "groups.csv", "report.csv", "returns.csv",
                 "report.html", "diagnostics.json", "manifest.json", "news_sources.csv"):
        assert (out / name).is_file(), name
    with (out / "report.csv").open(newline="") as f:
        row = next(csv.DictReader(f))
    assert row["Factor Name"] == "five-stock-prob"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "run"
    assert "report.csv" in manifest["outputs"]


def test_rerun_is_byte_identical(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(data_dir / "config.yaml", a).exit_code == 0
    assert _run(data_dir / "config.yaml", b).exit_code == 0
    assert _files(a) == _files(b)


def test_threaded_scoring_gives_same_outputs(data_dir, tmp_path):
    cfg = yaml.safe_load((data_dir / "config.yaml").read_text())
    cfg["sentiment"]["workers"] = 4
    (data_dir / "threaded.yaml").write_text(yaml.safe_dump(cfg))
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(data_dir / "config.yaml", a).exit_code == 0
    assert _run(data_dir / "threaded.yaml", b).exit_code == 0
    assert _files(a) == _files(b)


def test_format_override_writes_json(data_dir, tmp_path):
    out = tmp_path / "run"
    result = _run(data_dir / "config.yaml", out, "--format", "json")
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "report.json").read_text())
    assert payload["row"]["Factor Name"] == "five-stock-prob"
    assert not (out / "report.csv").exists()


def test_plots_are_captioned_in_html(data_dir, tmp_path):
    cfg = yaml.safe_load((data_dir / "config.yaml").read_text())
    cfg["output"]["plots"] = True
    (data_dir / "plots.yaml").write_text(yaml.safe_dump(cfg))
    out = tmp_path / "run"
    result = _run(data_dir / "plots.yaml", out)
    assert result.exit_code == 0, result.output
    for name in ("news_sources.png", "excess_returns.png", "net_returns.png", "groups.png"):
        assert (out / name).is_file(), name
    page = (out / "report.html").read_text(encoding="utf-8")
    assert "<h2>Charts</h2>" in page
    assert "<figcaption>Share of news items by source</figcaption>" in page
    assert "<td>newswire</td>" in page


def test_invalid_fee_rate_exits_2(data_dir, tmp_path):
    cfg = yaml.safe_load((data_dir / "config.yaml").read_text())
    cfg["backtest"]["fee_rate"] = 1.5
    bad = data_dir / "bad.yaml"
    bad.write_text(yaml.safe_dump(cfg))
    result = _run(bad, tmp_path / "run")
    assert result.exit_code == 2
    err = _error(result)
    assert err["error"] == "ConfigError"
    assert "fee_rate" in err["message"]
    assert err["location"].endswith("backtest")


def test_missing_input_exits_1(data_dir, tmp_path):
    (data_dir / "prices.csv").unlink()
    result = _run(data_dir / "config.yaml", tmp_path / "run")
    assert result.exit_code == 1
    assert "prices.csv" in _error(result)["message"]


def test_malformed_news_row_is_structured_error(data_dir, tmp_path):
    with (data_dir / "news.csv").open("a", encoding="utf-8") as f:
        f.write("N999,SSE:600000,2022-01-05T08:00:00+08:00,newswire,profit up, strongly,0.7,ContinuousPositiveProb\n")
    result = _run(data_dir / "config.yaml", tmp_path / "run")
    assert result.exit_code == 1
    err = _error(result)
    assert err["error"] == "RowErrors"
    assert err["module"] == "ingest"
    assert err["operation"] == "load_news"
    assert err["location"].endswith("news.csv:20")


def test_undecodable_news_is_structured_error(data_dir, tmp_path):
    with (data_dir / "news.csv").open("ab") as f:
        f.write(b"N999,SSE:600000,2022-01-05T08:00:00+08:00,newswire,\xff\xfe,0.7,ContinuousPositiveProb\n")
    result = _run(data_dir / "config.yaml", tmp_path / "run")
    assert result.exit_code == 1
    err = _error(result)
    assert err["error"] == "RowErrors"
    assert "BadEncoding" in err["message"]


def test_undecodable_config_exits_2(data_dir, tmp_path):
    bad = data_dir / "bad.yaml"
    bad.write_bytes(b"factor_name: \xff\n")
    result = _run(bad, tmp_path / "run")
    assert result.exit_code == 2
    assert _error(result)["error"] == "ConfigError"


def test_score_exports_panel_only(data_dir, tmp_path):
    out = tmp_path / "score"
    result = runner.invoke(app, ["score", "--config", str(data_dir / "config.yaml"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "factor_panel.csv").is_file()
    assert not (out / "ledger.csv").exists()


def test_gen_fixture_then_run(tmp_path):
    fx = tmp_path / "fx"
    result = runner.invoke(app, ["gen-fixture", "--seed", "3", "--stocks", "8", "--days", "12", "--out", str(fx)])
    assert result.exit_code == 0, result.output
    assert (fx / "config.yaml").is_file()
    cfg = yaml.safe_load((fx / "config.yaml").read_text())
    cfg["output"]["plots"] = False
    (fx / "config.yaml").write_text(yaml.safe_dump(cfg))
    result = _run(fx / "config.yaml", tmp_path / "run")
    assert result.exit_code == 0, result.output


def test_compare_two_runs(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(data_dir / "config.yaml", a).exit_code == 0
    assert _run(data_dir / "config_three_class.yaml", b).exit_code == 0
    out = tmp_path / "cmp"
    result = runner.invoke(app, ["compare", str(a), str(b), "--out", str(out)])
    assert result.exit_code == 0, result.output
    with (out / "comparison.csv").open(newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    assert tuple(reader.fieldnames) == REPORT_COLUMNS
    assert [r["Factor Name"] for r in rows] == ["five-stock-prob", "five-stock-three-class"]


def test_compare_missing_report_exits_1(data_dir, tmp_path):
    a = tmp_path / "a"
    assert _run(data_dir / "config.yaml", a).exit_code == 0
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(app, ["compare", str(a), str(empty)])
    assert result.exit_code == 1
    assert _error(result)["error"] == "MissingReport"


def test_compare_needs_two_dirs(tmp_path):
    result = runner.invoke(app, ["compare", str(tmp_path)])
    assert result.exit_code == 2
    assert _error(result)["error"] == "ConfigError"
