"""Output table schema: one row per (GEOID, week) with every measure.

Columns, in order::

    GEOID, Timestamp,
    Per_User_STU_all, Per_User_STU_<Category> x 7,
    Per_Visit_STU_all, Per_Visit_STU_<Category> x 7,
    Diversity, Gini

Categories are Grocery, Consume, Sports, Events, Dining, Arts, Religious.
Absent values are empty fields. Floats are written with ``repr`` so they
parse back to the identical double.
"""

import csv
import datetime as dt
import io
from dataclasses import dataclass, field

from .errors import MalformedValue, MissingColumn, NonMondayWeekStart
from .ingest import ALL, CATEGORIES


def column_name(measure, key):
    return f"{measure}_{key.value if hasattr(key, 'value') else key}"


SUFFIXES = (ALL,) + tuple(c.value for c in CATEGORIES)
MEASURE_COLUMNS = (
    tuple(column_name("Per_User_STU", s) for s in SUFFIXES)
    + tuple(column_name("Per_Visit_STU", s) for s in SUFFIXES)
    + ("Diversity", "Gini")
)
COLUMNS = ("GEOID", "Timestamp") + MEASURE_COLUMNS


@dataclass(frozen=True)
class StuRecord:
    geoid: str
    timestamp: dt.date
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(MEASURE_COLUMNS)
        if unknown:
            raise ValueError(f"unknown output columns {sorted(unknown)}")
        if self.timestamp.weekday() != 0:
            raise ValueError(f"Timestamp {self.timestamp} is not a Monday")

    def get(self, column):
        return self.values.get(column)


def _fmt(value):
    if value is None:
        return ""
    return repr(float(value))


def format_stu_records(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in sorted(records, key=lambda r: (r.timestamp, r.geoid)):
        writer.writerow(
            [rec.geoid, rec.timestamp.isoformat()] + [_fmt(rec.values.get(c)) for c in MEASURE_COLUMNS]
        )
    return buf.getvalue()


def parse_stu_records(stream):
    text = stream.decode("utf-8") if isinstance(stream, bytes) else stream
    if not isinstance(text, str):
        text = text.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise MissingColumn("output header does not match the STU schema", row=0)
    out = []
    for row_no, row in enumerate(reader, start=1):
        if len(row) != len(COLUMNS):
            raise MalformedValue("wrong number of fields", row=row_no)
        try:
            day = dt.date.fromisoformat(row[1])
        except ValueError:
            raise MalformedValue(f"bad Timestamp {row[1]!r}", row=row_no) from None
        if day.weekday() != 0:
            raise NonMondayWeekStart(f"Timestamp {row[1]} is not a Monday", row=row_no)
        values = {}
        for col, cell in zip(MEASURE_COLUMNS, row[2:]):
            if cell != "":
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise MalformedValue(f"{col} {cell!r} is not a number", row=row_no) from None
        out.append(StuRecord(row[0], day, values))
    return out
