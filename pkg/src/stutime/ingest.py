"""Readers and writers for the pipeline's input files.

Five CSV formats are understood (UTF-8, comma separated, RFC 4180 quoting):

weekly patterns
    ``poi_id, week_start, raw_visits, dwell_buckets, home_areas``.  The last two
    columns hold JSON object literals, e.g.
    ``{"<5": 4, "5-10": 2, "11-20": 0, ...}`` and ``{"120310103011": 3}``.
panel
    ``geoid, month, device_count, population`` with ``month`` as ``yyyy-mm`` and
    ``population`` optional (empty field).
POI catalog
    ``poi_id, naics, latitude, longitude, colocation_key, tract_geoid,
    open_date, close_date`` (dates optional, ``yyyy-mm-dd``).
category map
    ``naics, category``.
hierarchy / crosswalk
    ``tract_geoid, county_subdivision_geoid, county_geoid, metro_geoid`` and
    ``source_geoid, target_geoid, weight``.

GEOIDs are strings everywhere; leading zeros matter.
"""

import csv
import datetime as dt
import enum
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import (
    BadGeoidLength,
    CrosswalkWeightSumViolation,
    DuplicateNaicsMapping,
    IngestError,
    MalformedBucketObject,
    MalformedValue,
    MissingColumn,
    NegativeCount,
    NonMondayWeekStart,
    NonNestedHierarchy,
)

BUCKET_LABELS = ("<5", "5-10", "11-20", "21-60", "61-120", "121-240", ">240")

PATTERN_COLUMNS = ("poi_id", "week_start", "raw_visits", "dwell_buckets", "home_areas")
PANEL_COLUMNS = ("geoid", "month", "device_count", "population")
POI_COLUMNS = (
    "poi_id", "naics", "latitude", "longitude", "colocation_key",
    "tract_geoid", "open_date", "close_date",
)
CATEGORY_COLUMNS = ("naics", "category")
HIERARCHY_COLUMNS = ("tract_geoid", "county_subdivision_geoid", "county_geoid", "metro_geoid")
CROSSWALK_COLUMNS = ("source_geoid", "target_geoid", "weight")

WEIGHT_SUM_TOL = 1e-6


class ActivityCategory(str, enum.Enum):
    GROCERY = "Grocery"
    CONSUME = "Consume"
    SPORTS = "Sports"
    EVENTS = "Events"
    DINING = "Dining"
    ARTS = "Arts"
    RELIGIOUS = "Religious"

    def __str__(self):
        return self.value


CATEGORIES = tuple(ActivityCategory)
ALL = "all"


# -- records -----------------------------------------------------------------


@dataclass(frozen=True)
class WeeklyPattern:
    poi_id: str
    week_start: dt.date
    raw_visits: float
    dwell_buckets: tuple
    home_areas: dict = field(default_factory=dict)

    def bucket_map(self):
        return dict(zip(BUCKET_LABELS, self.dwell_buckets))


@dataclass(frozen=True)
class PanelObservation:
    geoid: str
    month: str
    device_count: int
    population: int | None = None

    @property
    def coverage(self):
        """Devices per resident, or None when the population is unknown or zero."""
        if not self.population:
            return None
        return self.device_count / self.population

    @property
    def flagged(self):
        if self.population is None:
            return False
        if self.population == 0:
            return self.device_count > 0
        return self.coverage > 1.0


@dataclass(frozen=True)
class PoiRecord:
    poi_id: str
    naics: str
    location: tuple
    colocation_key: str
    tract_geoid: str
    open_date: dt.date | None = None
    close_date: dt.date | None = None


@dataclass(frozen=True)
class CrosswalkWeight:
    source_geoid: str
    target_geoid: str
    weight: float


@dataclass(frozen=True)
class TractMembership:
    county_subdivision: str
    county: str
    metro: str | None = None


@dataclass
class GeoHierarchy:
    tracts: dict = field(default_factory=dict)
    crosswalk: list = field(default_factory=list)

    def unit_of(self, tract, level):
        """Unit GEOID containing ``tract`` at ``level`` (None if not covered)."""
        if level == "tract":
            return tract
        member = self.tracts.get(tract)
        if member is None:
            return None
        return getattr(member, level)

    def members(self, level):
        """Map unit GEOID -> sorted member tract GEOIDs for ``level``."""
        out = defaultdict(list)
        for tract in sorted(self.tracts):
            unit = self.unit_of(tract, level)
            if unit is not None:
                out[unit].append(tract)
        return dict(out)


@dataclass
class ParseResult:
    """Records parsed from one stream plus the rows skipped in lenient mode."""

    records: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def skip_count(self):
        return len(self.skipped)


class CategoryMap(dict):
    """NAICS code -> ActivityCategory."""

    def codes(self, category):
        return sorted(c for c, k in self.items() if k is category)


# -- low level helpers -------------------------------------------------------


def _text(stream):
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8-sig"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")


def _reader(stream, required):
    reader = csv.DictReader(_text(stream))
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}", row=0)
    return reader


def _digits(value, length, what, row=None):
    if len(value) != length or not value.isdigit():
        raise BadGeoidLength(f"{what} {value!r} is not {length} decimal digits", row=row)
    return value


def cbg_to_tract(cbg_geoid):
    """Census tract GEOID (11 chars) of a 12-char block-group GEOID."""
    _digits(cbg_geoid, 12, "block group GEOID")
    return cbg_geoid[:11]


def parse_date(text, row=None):
    try:
        return dt.date.fromisoformat(text.strip())
    except (ValueError, AttributeError):
        raise MalformedValue(f"bad date {text!r} (expected yyyy-mm-dd)", row=row) from None


def parse_month(text, row=None):
    text = text.strip()
    try:
        if len(text) != 7 or text[4] != "-":
            raise ValueError
        dt.date(int(text[:4]), int(text[5:]), 1)
    except ValueError:
        raise MalformedValue(f"bad month {text!r} (expected yyyy-mm)", row=row) from None
    return text


def month_of(day):
    return f"{day.year:04d}-{day.month:02d}"


def _count(value, what, row, exc=MalformedValue):
    if isinstance(value, bool):
        raise exc(f"{what} is not a number", row=row)
    if isinstance(value, str):
        try:
            value = int(value) if value.strip().lstrip("-").isdigit() else float(value)
        except ValueError:
            raise exc(f"{what} {value!r} is not a number", row=row) from None
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise exc(f"{what} {value!r} is not a finite number", row=row)
    if value < 0:
        raise NegativeCount(f"{what} is negative ({value})", row=row)
    return value


def _json_object(text, what, row):
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        raise MalformedBucketObject(f"{what} is not a JSON object", row=row) from None
    if not isinstance(obj, dict):
        raise MalformedBucketObject(f"{what} is not a JSON object", row=row)
    return obj


# -- weekly patterns ---------------------------------------------------------


def _pattern_from_row(rec, row):
    poi_id = rec["poi_id"]
    if not poi_id:
        raise MalformedValue("empty poi_id", row=row)
    week = parse_date(rec["week_start"], row)
    if week.weekday() != 0:
        raise NonMondayWeekStart(f"week_start {week.isoformat()} is not a Monday", row=row)
    raw = _count(rec["raw_visits"], "raw_visits", row)

    buckets = _json_object(rec["dwell_buckets"], "dwell_buckets", row)
    if set(buckets) != set(BUCKET_LABELS):
        raise MalformedBucketObject(
            f"dwell_buckets keys {sorted(buckets)} != {list(BUCKET_LABELS)}", row=row
        )
    counts = tuple(
        _count(buckets[b], f"bucket {b}", row, MalformedBucketObject) for b in BUCKET_LABELS
    )

    homes = {}
    for cbg, n in _json_object(rec["home_areas"], "home_areas", row).items():
        _digits(cbg, 12, "home_areas block group", row)
        n = _count(n, f"home_areas[{cbg}]", row)
        if n > raw:
            raise MalformedValue(f"home_areas[{cbg}]={n} exceeds raw_visits={raw}", row=row)
        homes[cbg] = n
    return WeeklyPattern(poi_id, week, raw, counts, homes)


def _parse_rows(stream, required, convert, strict):
    result = ParseResult()
    for row, rec in enumerate(_reader(stream, required), start=1):
        try:
            if None in rec or any(rec[c] is None for c in required):
                raise MalformedValue("wrong number of fields", row=row)
            result.records.append(convert(rec, row))
        except IngestError as err:
            if strict:
                raise
            result.skipped.append((row, err))
    return result


def parse_weekly_patterns(stream, strict=False):
    """Parse a weekly-patterns CSV.

    In lenient mode malformed rows are skipped and listed in
    ``ParseResult.skipped``; in strict mode the first one raises.
    """
    return _parse_rows(stream, PATTERN_COLUMNS, _pattern_from_row, strict)


def _fmt_num(x):
    if isinstance(x, float) and x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def format_weekly_patterns(patterns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PATTERN_COLUMNS)
    for p in patterns:
        buckets = "{" + ", ".join(
            f"{json.dumps(b)}: {_fmt_num(n)}" for b, n in zip(BUCKET_LABELS, p.dwell_buckets)
        ) + "}"
        homes = "{" + ", ".join(
            f"{json.dumps(g)}: {_fmt_num(n)}" for g, n in p.home_areas.items()
        ) + "}"
        writer.writerow((p.poi_id, p.week_start.isoformat(), _fmt_num(p.raw_visits), buckets, homes))
    return buf.getvalue()


# -- panel -------------------------------------------------------------------


def _panel_from_row(rec, row):
    geoid = rec["geoid"].strip()
    if len(geoid) not in (2, 5, 11) or not geoid.isdigit():
        raise BadGeoidLength(f"panel geoid {geoid!r} is not a state, county or tract GEOID", row=row)
    month = parse_month(rec["month"], row)
    devices = _count(rec["device_count"], "device_count", row)
    if devices != int(devices):
        raise MalformedValue(f"device_count {devices} is not an integer", row=row)
    pop = (rec.get("population") or "").strip()
    population = None
    if pop:
        population = _count(pop, "population", row)
        if population != int(population):
            raise MalformedValue(f"population {population} is not an integer", row=row)
        population = int(population)
    return PanelObservation(geoid, month, int(devices), population)


def parse_panel(stream, strict=False):
    """Parse a panel-summary CSV. ``population`` may be empty."""
    return _parse_rows(stream, PANEL_COLUMNS[:3], _panel_from_row, strict)


def format_panel(observations):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PANEL_COLUMNS)
    for o in observations:
        writer.writerow((o.geoid, o.month, o.device_count, "" if o.population is None else o.population))
    return buf.getvalue()


# -- reference files ---------------------------------------------------------


def load_category_map(stream):
    by_name = {c.value.lower(): c for c in CATEGORIES}
    cmap = CategoryMap()
    for row, rec in enumerate(_reader(stream, CATEGORY_COLUMNS), start=1):
        code = _naics(rec["naics"], row)
        cat = by_name.get(rec["category"].strip().lower())
        if cat is None:
            raise MalformedValue(f"unknown category {rec['category']!r}", row=row)
        if code in cmap:
            raise DuplicateNaicsMapping(
                f"NAICS {code} mapped to both {cmap[code]} and {cat}", row=row
            )
        cmap[code] = cat
    return cmap


def format_category_map(cmap):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CATEGORY_COLUMNS)
    for code in sorted(cmap):
        writer.writerow((code, cmap[code].value))
    return buf.getvalue()


def _naics(text, row):
    text = text.strip()
    if len(text) != 6 or not text.isdigit():
        raise MalformedValue(f"NAICS {text!r} is not 6 digits", row=row)
    return text


def load_poi_catalog(stream):
    pois = []
    for row, rec in enumerate(_reader(stream, POI_COLUMNS[:6]), start=1):
        opened = rec.get("open_date") or ""
        closed = rec.get("close_date") or ""
        opened = parse_date(opened, row) if opened.strip() else None
        closed = parse_date(closed, row) if closed.strip() else None
        if opened and closed and closed < opened:
            raise MalformedValue("close_date precedes open_date", row=row)
        try:
            loc = (float(rec["latitude"]), float(rec["longitude"]))
        except ValueError:
            raise MalformedValue("bad latitude/longitude", row=row) from None
        pois.append(PoiRecord(
            poi_id=rec["poi_id"],
            naics=_naics(rec["naics"], row),
            location=loc,
            colocation_key=rec["colocation_key"],
            tract_geoid=_digits(rec["tract_geoid"].strip(), 11, "tract_geoid", row),
            open_date=opened,
            close_date=closed,
        ))
    return pois


def format_poi_catalog(pois):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POI_COLUMNS)
    for p in pois:
        writer.writerow((
            p.poi_id, p.naics, repr(p.location[0]), repr(p.location[1]), p.colocation_key,
            p.tract_geoid,
            p.open_date.isoformat() if p.open_date else "",
            p.close_date.isoformat() if p.close_date else "",
        ))
    return buf.getvalue()


def load_crosswalk(stream):
    weights = []
    totals = defaultdict(float)
    for row, rec in enumerate(_reader(stream, CROSSWALK_COLUMNS), start=1):
        try:
            w = float(rec["weight"])
        except ValueError:
            raise MalformedValue(f"bad weight {rec['weight']!r}", row=row) from None
        if not 0.0 <= w <= 1.0:
            raise MalformedValue(f"weight {w} outside [0, 1]", row=row)
        cw = CrosswalkWeight(rec["source_geoid"].strip(), rec["target_geoid"].strip(), w)
        weights.append(cw)
        totals[cw.source_geoid] += w
    for src, total in totals.items():
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise CrosswalkWeightSumViolation(src, total)
    return weights


def load_hierarchy(stream, crosswalk=None):
    """Load tract membership rows and, optionally, a crosswalk stream.

    Rows must nest: the county is the tract's 5-character prefix, the county
    subdivision starts with the county, and all tracts of a county share one
    metro (or none).
    """
    tracts = {}
    county_metro = {}
    for row, rec in enumerate(_reader(stream, HIERARCHY_COLUMNS[:3]), start=1):
        tract = _digits(rec["tract_geoid"].strip(), 11, "tract_geoid", row)
        county = _digits(rec["county_geoid"].strip(), 5, "county_geoid", row)
        cousub = _digits(rec["county_subdivision_geoid"].strip(), 10, "county_subdivision_geoid", row)
        metro = (rec.get("metro_geoid") or "").strip() or None
        if metro is not None:
            _digits(metro, 5, "metro_geoid", row)
        if county != tract[:5]:
            raise NonNestedHierarchy(f"tract {tract} is not in county {county}", row=row)
        if cousub[:5] != county:
            raise NonNestedHierarchy(f"county subdivision {cousub} is not in county {county}", row=row)
        if county_metro.setdefault(county, metro) != metro:
            raise NonNestedHierarchy(f"county {county} assigned to two metros", row=row)
        if tract in tracts:
            raise MalformedValue(f"duplicate tract {tract}", row=row)
        tracts[tract] = TractMembership(cousub, county, metro)
    cw = load_crosswalk(crosswalk) if crosswalk is not None else []
    return GeoHierarchy(tracts, cw)


def format_hierarchy(hierarchy):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HIERARCHY_COLUMNS)
    for tract in sorted(hierarchy.tracts):
        m = hierarchy.tracts[tract]
        writer.writerow((tract, m.county_subdivision, m.county, m.metro or ""))
    return buf.getvalue()


def format_crosswalk(weights):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CROSSWALK_COLUMNS)
    for w in weights:
        writer.writerow((w.source_geoid, w.target_geoid, repr(w.weight)))
    return buf.getvalue()
