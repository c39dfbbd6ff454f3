import json

import pytest

from fuselens.metrics import MetricReport
from fuselens.report import CSV_HEADER, aggregate, fmt, parse_csv, to_csv, to_json


def rep(v):
    return MetricReport(q_mi=v, q_abf=v / 2, ssim_ct=1 - v, ssim_mr=0.25, sl=v / 3)


def test_header():
    assert ",".join(CSV_HEADER) == "id,q_mi,q_abf,ssim_ct,ssim_mr,sl"


def test_fmt_ten_significant_digits():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(0.0) == "0"


def test_aggregate_mean():
    mean = aggregate([rep(0.2), rep(0.4)])
    assert mean.q_mi == pytest.approx(0.3)
    assert mean.ssim_mr == 0.25


def test_aggregate_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_csv_roundtrip():
    rows = [("a", rep(0.1)), ("b", rep(0.7))]
    text = to_csv(rows)
    assert text.splitlines()[0] == "id,q_mi,q_abf,ssim_ct,ssim_mr,sl"
    parsed = parse_csv(text)
    assert [i for i, _ in parsed] == ["a", "b"]
    assert parsed[1][1].q_mi == pytest.approx(0.7, rel=1e-10)


def test_json_layout():
    doc = json.loads(to_json([("a", rep(0.1))], rep(0.1)))
    assert set(doc) == {"entries", "aggregate"}
    assert doc["entries"][0]["id"] == "a"
    assert set(doc["aggregate"]) == set(MetricReport.FIELDS)
