import datetime as dt
import pathlib
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from sentibench.errors import BenchmarkGap, DuplicateNewsId, EmptyDataset, RowErrors, SchemaError
from sentibench.ingest import (NewsDataset, filter_pre_open, load_benchmark, load_calendar, load_news, load_prices,
                               news_source_report)
from sentibench.model import MarketTimestamp, NewsRecord, parse_stock_id

DATA = pathlib.Path(__file__).parent / "data" / "five_stock"
NEWS_HEADER = "news_id,stock_id,timestamp,source,text,score,provider\n"


def _news(news_id, hhmm, source="wire", day="2022-01-04"):
    return NewsRecord(news_id, parse_stock_id("SSE:600000"), MarketTimestamp.parse(f"{day}T{hhmm}:00+08:00"), source,
                      text="t")


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture
def market():
    cal = load_calendar(DATA / "calendar.csv")
    bench = load_benchmark(DATA / "benchmark.csv", cal)
    return cal, bench


def test_load_bundled_news():
    ds = load_news(DATA / "news.csv")
    assert len(ds) == 18
    assert ds.rows_read == 18
    assert ds.source_histogram["newswire"] == 7
    assert ds.records[0].score == pytest.approx(0.9)


def test_three_row_file(tmp_path):
    p = _write(tmp_path, "news.csv", NEWS_HEADER
               + "A,SSE:600000,2022-01-04T08:00:00+08:00,wire,x,,\n"
               + "B,SSE:600000,2022-01-04T08:01:00+08:00,wire,y,,\n"
               + "C,SZSE:000001,2022-01-04T08:02:00+08:00,feed,z,,\n")
    assert [r.news_id for r in load_news(p)] == ["A", "B", "C"]


def test_jsonl_news(tmp_path):
    p = _write(tmp_path, "news.jsonl",
               '{"news_id": "A", "stock_id": "SSE:600000", "timestamp": "2022-01-04T08:00:00+08:00", '
               '"source": "wire", "score": 0.7}\n')
    ds = load_news(p, "jsonl")
    assert ds.records[0].score == pytest.approx(0.7)


def test_missing_stock_id_reports_line_2(tmp_path):
    p = _write(tmp_path, "news.csv", NEWS_HEADER + "A,,2022-01-04T08:00:00+08:00,wire,x,,\n")
    with pytest.raises(RowErrors) as exc:
        load_news(p)
    assert exc.value.lines == [2]
    assert exc.value.issues[0].field == "stock_id"


def test_missing_column_names_it(tmp_path):
    p = _write(tmp_path, "news.csv", "news_id,timestamp,source,text\nA,2022-01-04T08:00:00+08:00,wire,x\n")
    with pytest.raises(SchemaError) as exc:
        load_news(p)
    assert exc.value.column == "stock_id"


def test_bad_timestamp_line(tmp_path):
    p = _write(tmp_path, "news.csv", NEWS_HEADER
               + "A,SSE:600000,2022-01-04T08:00:00+08:00,wire,x,,\n"
               + "B,SSE:600000,not-a-time,wire,x,,\n")
    with pytest.raises(RowErrors) as exc:
        load_news(p)
    assert exc.value.lines == [3]
    assert exc.value.issues[0].kind == "BadTimestamp"


def test_duplicate_news_id_lines(tmp_path):
    rows = [f"N{i},SSE:600000,2022-01-04T08:0{i}:00+08:00,wire,x,,\n" for i in range(1, 9)]
    rows.insert(7, "N3,SSE:600000,2022-01-04T08:30:00+08:00,wire,x,,\n")
    p = _write(tmp_path, "news.csv", NEWS_HEADER + "".join(rows))
    with pytest.raises(DuplicateNewsId) as exc:
        load_news(p)
    assert exc.value.lines == [4, 9]


def test_skip_bad_rows_keeps_counts(tmp_path):
    p = _write(tmp_path, "news.csv", NEWS_HEADER
               + "A,SSE:600000,2022-01-04T08:00:00+08:00,wire,x,,\n"
               + "B,SSE:6000,2022-01-04T08:00:00+08:00,wire,x,,\n"
               + "C,SSE:600000,2022-01-04T08:00:00+08:00,wire,,,\n")
    ds = load_news(p, skip_bad_rows=True)
    assert len(ds) == 1
    assert ds.rows_read == len(ds) + len(ds.issues)
    assert {i.kind for i in ds.issues} == {"MalformedStockId", "MissingPayload"}


def test_filter_pre_open():
    ds = NewsDataset([_news("a", "08:00"), _news("b", "09:29"), _news("c", "09:31")])
    assert [r.news_id for r in filter_pre_open(ds)] == ["a", "b"]
    assert len(filter_pre_open(NewsDataset([]))) == 0
    assert len(filter_pre_open(NewsDataset([_news("x", "10:00")]))) == 0


def test_bundled_news_pre_open():
    kept = filter_pre_open(load_news(DATA / "news.csv"))
    assert {r.news_id for r in kept}.isdisjoint({"N006", "N018"})
    assert len(kept) == 16


def test_source_report():
    ds = NewsDataset([_news(str(i), "08:00", "A" if i < 6 else "B") for i in range(10)])
    assert news_source_report(ds) == {"A": pytest.approx(60.0), "B": pytest.approx(40.0)}
    assert news_source_report(NewsDataset([_news("x", "08:00", "X")])) == {"X": 100.0}


def test_source_report_reproduces_published_shares():
    counts = {"RoyalFlush": 5957, "Eastmoney": 2102, "Sina": 1941}
    records = [_news(f"{src}{i}", "08:00", src) for src, n in counts.items() for i in range(n)]
    shares = news_source_report(NewsDataset(records))
    assert f"{shares['RoyalFlush']:.2f}" == "59.57"
    assert list(shares) == ["RoyalFlush", "Eastmoney", "Sina"]


def test_source_report_empty():
    with pytest.raises(EmptyDataset):
        news_source_report(NewsDataset([]))


def test_load_prices_synthesizes_suspension(market):
    cal, bench = market
    prices = load_prices(DATA / "prices.csv", calendar=cal, benchmark=bench)
    assert prices.rows_read == 29
    assert prices.synthesized == 1
    rec = prices.get(parse_stock_id("SZSE:000004"), dt.date(2022, 1, 7))
    assert not rec.tradable
    assert rec.close == Decimal("15.45")
    assert not prices.get(parse_stock_id("SSE:600004"), dt.date(2022, 1, 6)).tradable


def test_two_stocks_three_days(tmp_path):
    cal = load_calendar(_write(tmp_path, "cal.csv", "2022-01-04\n2022-01-05\n2022-01-06\n"))
    bench = {d: 100.0 for d in cal}
    lines = ["stock_id,date,close,tradable,vwap_0930_0935"]
    for s in ("SSE:600000", "SZSE:000001"):
        lines += [f"{s},{d.isoformat()},10.00,1,10.00" for d in cal]
    prices = load_prices(_write(tmp_path, "p.csv", "\n".join(lines) + "\n"), calendar=cal, benchmark=bench)
    assert len(prices.records) == 6
    assert prices.synthesized == 0


def test_zero_price_is_row_error(tmp_path, market):
    cal, bench = market
    p = _write(tmp_path, "p.csv", "stock_id,date,close,tradable,vwap_0930_0935\n"
                                  "SSE:600000,2022-01-04,10.00,1,10.00\n"
                                  "SSE:600000,2022-01-05,0,1,10.00\n")
    with pytest.raises(RowErrors) as exc:
        load_prices(p, calendar=cal, benchmark=bench)
    assert exc.value.issues[0].kind == "NonPositivePrice"
    assert exc.value.lines == [3]


def test_off_calendar_price_row(tmp_path, market):
    cal, bench = market
    p = _write(tmp_path, "p.csv", "stock_id,date,close,tradable,vwap_0930_0935\nSSE:600000,2022-01-08,10.00,1,10.00\n")
    with pytest.raises(RowErrors) as exc:
        load_prices(p, calendar=cal, benchmark=bench)
    assert exc.value.issues[0].kind == "DateNotInCalendar"


def test_window_trades_without_volume_mean_not_tradable(tmp_path, market):
    cal, bench = market
    header = "stock_id,date,close,tradable," + ",".join(f"w{i}_price,w{i}_volume" for i in range(1, 6))
    row = "SSE:600000,2022-01-04,10.00,1," + ",".join("10.00,0" for _ in range(5))
    prices = load_prices(_write(tmp_path, "p.csv", f"{header}\n{row}\n"), calendar=cal, benchmark=bench)
    assert not prices.get(parse_stock_id("SSE:600000"), dt.date(2022, 1, 4)).tradable


def test_benchmark_gap(tmp_path, market):
    cal, _ = market
    p = _write(tmp_path, "b.csv", "date,index_level\n2022-01-04,4000\n")
    with pytest.raises(BenchmarkGap):
        load_benchmark(p, cal)


def test_benchmark_return(market):
    cal, bench = market
    prices = load_prices(DATA / "prices.csv", calendar=cal, benchmark=bench)
    assert prices.benchmark_return(dt.date(2022, 1, 4)) == 0.0
    assert prices.benchmark_return(dt.date(2022, 1, 5)) == pytest.approx(4010 / 4000 - 1)


def test_calendar_rejects_unsorted(tmp_path):
    with pytest.raises(RowErrors):
        load_calendar(_write(tmp_path, "cal.csv", "date\n2022-01-05\n2022-01-04\n"))


def test_extra_field_is_row_error_with_line(tmp_path):
    text = (DATA / "news.csv").read_text(encoding="utf-8")
    p = _write(tmp_path, "news.csv", text + "N999,SSE:600000,2022-01-05T08:00:00+08:00,wire,profit up, strongly,0.7,"
                                            "ContinuousPositiveProb\n")
    with pytest.raises(RowErrors) as exc:
        load_news(p)
    assert exc.value.issues[0].kind == "BadFieldCount"
    assert exc.value.lines == [20]
    assert exc.value.location == f"{p}:20"
    assert exc.value.operation == "load_news"


def test_invalid_utf8_reports_line(tmp_path):
    p = tmp_path / "news.csv"
    p.write_bytes(NEWS_HEADER.encode() + b"A,SSE:600000,2022-01-04T08:00:00+08:00,wire,ok,,\n"
                  + b"B,SSE:600000,2022-01-04T08:01:00+08:00,wire,\xff\xfe,,\n")
    with pytest.raises(RowErrors) as exc:
        load_news(p)
    assert exc.value.issues[0].kind == "BadEncoding"
    assert exc.value.lines == [3]


def test_prices_and_calendar_decode_errors_are_row_errors(tmp_path, market):
    cal, bench = market
    bad = tmp_path / "p.csv"
    bad.write_bytes(b"stock_id,date,close,tradable,vwap_0930_0935\n"
                    b"SSE:600000,2022-01-04,10.00,1,10.00\n"
                    b"SSE:600000,2022-01-05,10.00,1,10.00,9\n")
    with pytest.raises(RowErrors) as exc:
        load_prices(bad, calendar=cal, benchmark=bench)
    assert exc.value.issues[0].kind == "BadFieldCount"
    assert exc.value.lines == [3]
    cal_file = tmp_path / "cal.csv"
    cal_file.write_bytes(b"date\n2022-01-04\n\x80\n")
    with pytest.raises(RowErrors) as exc:
        load_calendar(cal_file)
    assert exc.value.lines == [3]


def test_suspension_fill_runs_to_calendar_end(tmp_path, market):
    cal, bench = market
    p = _write(tmp_path, "p.csv", "stock_id,date,close,tradable,vwap_0930_0935\n"
                                  "SSE:600000,2022-01-05,10.00,1,10.00\n"
                                  "SSE:600000,2022-01-06,10.50,1,10.10\n")
    prices = load_prices(p, calendar=cal, benchmark=bench)
    sid = parse_stock_id("SSE:600000")
    assert prices.get(sid, dt.date(2022, 1, 4)) is None
    assert prices.synthesized == 3
    for d in cal.dates[3:]:
        rec = prices.get(sid, d)
        assert not rec.tradable
        assert rec.close == Decimal("10.50")


@given(st.lists(st.tuples(st.integers(0, 23), st.integers(0, 59)), max_size=20))
def test_filter_pre_open_is_idempotent(times):
    ds = NewsDataset([_news(str(i), f"{h:02d}:{m:02d}") for i, (h, m) in enumerate(times)])
    once = filter_pre_open(ds)
    assert filter_pre_open(once) == once
    assert all(r.timestamp.time < dt.time(9, 30) for r in once)


def test_loading_is_deterministic(market):
    cal, bench = market
    assert load_news(DATA / "news.csv") == load_news(DATA / "news.csv")
    a = load_prices(DATA / "prices.csv", calendar=cal, benchmark=bench)
    b = load_prices(DATA / "prices.csv", calendar=cal, benchmark=bench)
    assert a.records == b.records
    assert load_calendar(DATA / "calendar.csv") == cal
