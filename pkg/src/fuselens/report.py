"""Metric report serialization (CSV / JSON) at 10 significant digits."""

import csv
import io
import json
from typing import Dict, List, Sequence, Tuple

from .metrics import MetricReport

FIELDS = MetricReport.FIELDS
CSV_HEADER = ("id",) + FIELDS
AGGREGATE_ID = "mean"


def fmt(value: float) -> str:
    return format(value, ".10g")


def rounded(value: float) -> float:
    return float(fmt(value))


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Arithmetic mean of each field across reports."""
    if not reports:
        raise ValueError("no reports to aggregate")
    n = len(reports)
    return MetricReport(**{f: sum(getattr(r, f) for r in reports) / n for f in FIELDS})


def to_csv(rows: Sequence[Tuple[str, MetricReport]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for ident, rep in rows:
        writer.writerow([ident] + [fmt(getattr(rep, f)) for f in FIELDS])
    return buf.getvalue()


def record_dict(rep: MetricReport) -> Dict[str, float]:
    return {f: rounded(getattr(rep, f)) for f in FIELDS}


def to_json(rows: Sequence[Tuple[str, MetricReport]], aggregate_row: MetricReport = None) -> str:
    doc = {"entries": [dict(id=ident, **record_dict(rep)) for ident, rep in rows]}
    if aggregate_row is not None:
        doc["aggregate"] = record_dict(aggregate_row)
    return json.dumps(doc, indent=2) + "\n"


def parse_csv(text: str) -> List[Tuple[str, MetricReport]]:
    reader = csv.DictReader(io.StringIO(text))
    return [(row["id"], MetricReport(**{f: float(row[f]) for f in FIELDS})) for row in reader]
