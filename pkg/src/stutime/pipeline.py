"""End-to-end computation: input directory -> per-level weekly tables."""

import contextlib
import csv
import io
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import ingest
from .aggregate import (
    LEVELS,
    Level,
    aggregate_diversity,
    aggregate_per_user,
    aggregate_per_visit,
    compute_region_gini,
)
from .diagnostics import Diagnostics
from .errors import IngestError
from .dispersion import shannon_diversity
from .ingest import ALL, month_of
from .measures import DwellPolicy, accumulate_week, dedup_colocated, foundational_stu, panel_lookup
from .records import StuRecord, column_name, format_stu_records

log = logging.getLogger(__name__)

INPUT_FILES = {
    "patterns": "patterns.csv",
    "panel": "panel.csv",
    "catalog": "pois.csv",
    "categories": "categories.csv",
    "hierarchy": "hierarchy.csv",
    "crosswalk": "crosswalk.csv",
}


@dataclass
class Inputs:
    patterns: list
    catalog: list
    category_map: dict
    hierarchy: ingest.GeoHierarchy
    panel: list


@dataclass
class ComputeResult:
    # level -> week -> list of StuRecord
    tables: dict
    diagnostics: Diagnostics
    coverage: list = field(default_factory=list)

    def records(self, level):
        return [r for week in sorted(self.tables.get(Level(level), {}))
                for r in self.tables[Level(level)][week]]


def load_inputs(directory, strict=False, diagnostics=None):
    """Read the standard input files from ``directory``.

    ``crosswalk.csv`` is optional; the rest are required.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    d = Path(directory)

    @contextlib.contextmanager
    def opened(name):
        with open(d / INPUT_FILES[name], "rb") as f:
            try:
                yield f
            except IngestError as err:
                err.args = (f"{INPUT_FILES[name]}: {err}",)
                err.file = INPUT_FILES[name]
                raise

    with opened("patterns") as f:
        parsed = ingest.parse_weekly_patterns(f, strict=strict)
    for row, err in parsed.skipped:
        diagnostics.emit("SkippedRow", f"{INPUT_FILES['patterns']}:{row}", f"{type(err).__name__}: {err.reason}")
    with opened("panel") as f:
        panel = ingest.parse_panel(f, strict=strict)
    for row, err in panel.skipped:
        diagnostics.emit("SkippedRow", f"{INPUT_FILES['panel']}:{row}", f"{type(err).__name__}: {err.reason}")
    with opened("catalog") as f:
        catalog = ingest.load_poi_catalog(f)
    with opened("categories") as f:
        cmap = ingest.load_category_map(f)
    crosswalk = d / INPUT_FILES["crosswalk"]
    with opened("hierarchy") as f:
        if crosswalk.exists():
            with open(crosswalk, "rb") as cw:
                hierarchy = ingest.load_hierarchy(f, cw)
        else:
            hierarchy = ingest.load_hierarchy(f)
    for obs in panel:
        if obs.flagged:
            diagnostics.emit("PanelCoverageFlag", f"{obs.geoid}:{obs.month}",
                             f"devices={obs.device_count} population={obs.population}")
    return Inputs(list(parsed), catalog, cmap, hierarchy, list(panel))


def _values(stu, diversity=None, gini=None):
    values = {}
    if stu is not None:
        per_user, per_visit = stu
        for key, v in (per_user or {}).items():
            values[column_name("Per_User_STU", key)] = v
        for key, v in (per_visit or {}).items():
            values[column_name("Per_Visit_STU", key)] = v
    if diversity is not None:
        values["Diversity"] = diversity
    if gini is not None:
        values["Gini"] = gini
    return values


def compute_week(week, patterns, inputs, policy=DwellPolicy(), strict=False,
                 levels=LEVELS, lookup=None):
    """All output rows for one week. Returns ``({level: [StuRecord]}, Diagnostics)``."""
    diagnostics = Diagnostics()
    lookup = lookup if lookup is not None else panel_lookup(inputs.panel)
    pois = {p.poi_id: p for p in inputs.catalog}
    patterns = dedup_colocated(patterns, pois, diagnostics)
    acc = accumulate_week(patterns, pois, inputs.category_map, policy, strict, diagnostics)
    acc.week_start = week
    stu = foundational_stu(acc.category_times(), lookup, week,
                           tracts=inputs.hierarchy.tracts, strict=strict, diagnostics=diagnostics)

    diversity = {}
    for tract in stu:
        profile = {s: m for s, m in acc.sectors.get(tract, {}).items() if m > 0}
        if profile:
            diversity[tract] = shannon_diversity(profile)
    for tract in stu:
        if tract not in inputs.hierarchy.tracts:
            diagnostics.emit("TractNotInHierarchy", tract, week.isoformat())

    out = {}
    levels = [Level(lv) for lv in levels]
    if Level.TRACT in levels:
        out[Level.TRACT] = [
            StuRecord(t, week, _values((s.per_user, s.per_visit), diversity.get(t)))
            for t, s in sorted(stu.items())
        ]

    month = month_of(week)
    devices = {t: s.device_count for t, s in stu.items()}
    per_user_all = {t: s.per_user[ALL] for t, s in stu.items() if s.per_user is not None}
    populations = {
        t: lookup[(t, month)].population for t in stu
        if (t, month) in lookup and lookup[(t, month)].population is not None
    }
    for level in levels:
        if level is Level.TRACT:
            continue
        pu = aggregate_per_user(stu, inputs.hierarchy, level, diagnostics)
        pv = aggregate_per_visit(stu, inputs.hierarchy, level, diagnostics)
        dv = aggregate_diversity(diversity, devices, inputs.hierarchy, level, diagnostics)
        gi = compute_region_gini(per_user_all, populations, inputs.hierarchy, level, diagnostics)
        units = sorted(set(pu) | set(pv) | set(dv) | set(gi))
        out[level] = [
            StuRecord(u, week, _values((pu.get(u), pv.get(u)), dv.get(u), gi.get(u)))
            for u in units
        ]
    return out, diagnostics


def compute(inputs, policy=DwellPolicy(), strict=False, levels=LEVELS, workers=1):
    """Run every week, optionally on a thread pool; results merge in week order."""
    diagnostics = Diagnostics()
    by_week = defaultdict(list)
    for p in inputs.patterns:
        by_week[p.week_start].append(p)
    weeks = sorted(by_week)
    if not weeks:
        diagnostics.emit("NoPatterns", "patterns", "no weekly pattern rows to process")
    lookup = panel_lookup(inputs.panel)

    def run(week):
        return compute_week(week, by_week[week], inputs, policy, strict, levels, lookup)

    if workers > 1 and len(weeks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, weeks))
    else:
        results = [run(w) for w in weeks]

    tables = defaultdict(dict)
    for week, (out, diag) in zip(weeks, results):
        diagnostics.extend(diag)
        for level, rows in out.items():
            tables[level][week] = rows
    return ComputeResult(dict(tables), diagnostics, panel_coverage(inputs.panel))


COVERAGE_COLUMNS = ("level", "geoid", "month", "device_count", "population", "coverage_rate", "flagged")
_PANEL_LEVEL = {11: "tract", 5: "county", 2: "state"}


def panel_coverage(panel):
    """Device-to-population ratios at tract, county and state level per month.

    County and state rows are summed from tracts unless the panel already
    carries them.
    """
    given = {(o.geoid, o.month): o for o in panel}
    sums = defaultdict(lambda: [0, 0, True])
    for o in panel:
        if len(o.geoid) != 11:
            continue
        for prefix in (o.geoid[:5], o.geoid[:2]):
            s = sums[(prefix, o.month)]
            s[0] += o.device_count
            if o.population is None:
                s[2] = False
            else:
                s[1] += o.population
    for (geoid, month), (dev, pop, complete) in sums.items():
        if (geoid, month) not in given:
            given[(geoid, month)] = ingest.PanelObservation(geoid, month, dev, pop if complete else None)
    rows = []
    for (geoid, month), o in given.items():
        rows.append((_PANEL_LEVEL[len(geoid)], geoid, month, o.device_count, o.population,
                     o.coverage, o.flagged))
    order = {"tract": 0, "county": 1, "state": 2}
    rows.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    return rows


def format_coverage(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COVERAGE_COLUMNS)
    for level, geoid, month, dev, pop, rate, flagged in rows:
        writer.writerow((level, geoid, month, dev, "" if pop is None else pop,
                         "" if rate is None else repr(rate), int(flagged)))
    return buf.getvalue()


def write_outputs(result, directory):
    """Write ``<level>/<yyyy-mm-dd>.csv`` plus diagnostics and coverage files."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for level in LEVELS:
        for week, rows in sorted(result.tables.get(level, {}).items()):
            folder = root / level.value
            folder.mkdir(exist_ok=True)
            path = folder / f"{week.isoformat()}.csv"
            path.write_text(format_stu_records(rows), encoding="utf-8", newline="")
            written.append(path)
    (root / "diagnostics.csv").write_text(result.diagnostics.to_csv(), encoding="utf-8", newline="")
    (root / "panel_coverage.csv").write_text(format_coverage(result.coverage), encoding="utf-8",
                                             newline="")
    return written
