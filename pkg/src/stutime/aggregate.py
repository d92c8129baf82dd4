"""Roll tract measures up to county subdivisions, counties and metros.

Weighted means are carried as ``(sum w*x, sum w)`` pairs so partial results
from different partitions merge by addition.
"""

import enum
from collections import defaultdict
from dataclasses import dataclass

from .diagnostics import Diagnostics
from .dispersion import gini_stu
from .errors import DegenerateRegion, UnmappedSource
from .ingest import ALL, CATEGORIES


class Level(str, enum.Enum):
    TRACT = "tract"
    COUNTY_SUBDIVISION = "county_subdivision"
    COUNTY = "county"
    METRO = "metro"

    def __str__(self):
        return self.value


LEVELS = tuple(Level)
UPPER_LEVELS = LEVELS[1:]
GEOID_LENGTH = {Level.TRACT: 11, Level.COUNTY_SUBDIVISION: 10, Level.COUNTY: 5, Level.METRO: 5}
KEYS = (ALL,) + CATEGORIES


@dataclass(frozen=True)
class AggregationKey:
    level: Level
    geoid: str
    week_start: object

    def __post_init__(self):
        level = Level(self.level)
        object.__setattr__(self, "level", level)
        if len(self.geoid) != GEOID_LENGTH[level]:
            raise ValueError(f"{level} GEOID {self.geoid!r} should have {GEOID_LENGTH[level]} characters")


@dataclass
class WeightedMean:
    total: float = 0.0
    weight: float = 0.0

    def add(self, value, weight):
        self.total += value * weight
        self.weight += weight
        return self

    def merge(self, other):
        return WeightedMean(self.total + other.total, self.weight + other.weight)

    @property
    def value(self):
        return self.total / self.weight if self.weight > 0 else None


def _units(hierarchy, level, tracts):
    """unit -> member tracts (restricted to ``tracts``) for ``level``."""
    level = Level(level)
    out = defaultdict(list)
    for tract in sorted(tracts):
        unit = hierarchy.unit_of(tract, level.value) if level is not Level.TRACT else tract
        if unit is not None:
            out[unit].append(tract)
    return out


def _finalize(acc, unit_keys, diagnostics, what, level):
    out = {}
    for unit in sorted(unit_keys):
        vals = {k: m.value for k, m in acc.get(unit, {}).items()}
        vals = {k: v for k, v in vals.items() if v is not None}
        if not vals:
            diagnostics.emit("EmptyUnit", f"{level}:{unit}", what)
        out[unit] = vals
    return out


def weighted_sums(stu, hierarchy, level, measure):
    """Partial ``WeightedMean`` per (unit, key) for one measure.

    ``measure`` is ``"per_user"`` (device weights), ``"per_visit"``
    (attributed-visit weights; the category's own visits for category
    values) or ``"diversity"`` (device weights; ``stu`` then maps tract ->
    (H, devices)).
    """
    acc = defaultdict(lambda: defaultdict(WeightedMean))
    units = _units(hierarchy, level, stu)
    for unit, members in units.items():
        for tract in members:
            rec = stu[tract]
            if measure == "per_user":
                if rec.per_user is None or not rec.device_count:
                    continue
                for k in KEYS:
                    acc[unit][k].add(rec.per_user[k], rec.device_count)
            elif measure == "per_visit":
                for k in KEYS:
                    w = rec.total_attributed_visits if k == ALL else rec.category_visits.get(k, 0.0)
                    if w > 0 and k in rec.per_visit:
                        acc[unit][k].add(rec.per_visit[k], w)
            elif measure == "diversity":
                h, devices = rec
                if h is not None and devices:
                    acc[unit][ALL].add(h, devices)
            else:
                raise ValueError(f"unknown measure {measure!r}")
    return acc, units


def aggregate_per_user(stu, hierarchy, level, diagnostics=None):
    """Device-weighted mean of tract per-user minutes for every unit.

    ``stu`` maps tract -> FoundationalStu. Tracts without a per-user value
    are left out of both numerator and denominator.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    acc, units = weighted_sums(stu, hierarchy, level, "per_user")
    return _finalize(acc, units, diagnostics, "per_user", level)


def aggregate_per_visit(stu, hierarchy, level, diagnostics=None):
    """Visit-weighted mean of tract per-visit minutes for every unit."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    acc, units = weighted_sums(stu, hierarchy, level, "per_visit")
    return _finalize(acc, units, diagnostics, "per_visit", level)


def aggregate_diversity(diversity, devices, hierarchy, level, diagnostics=None):
    """Device-weighted mean of tract diversity.

    This is a mean of tract entropies, not the entropy of the pooled
    profile, so no pooling identity holds.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    pairs = {t: (diversity.get(t), devices.get(t)) for t in set(diversity) | set(devices)}
    acc, units = weighted_sums(pairs, hierarchy, level, "diversity")
    out = _finalize(acc, units, diagnostics, "diversity", level)
    return {u: v.get(ALL) for u, v in out.items()}


def compute_region_gini(per_user, populations, hierarchy, level, diagnostics=None):
    """Gini of per-user STU over each unit's member tracts.

    ``per_user`` and ``populations`` map tract -> value; tracts missing either
    are left out. Units that cannot support a Gini get ``None``.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    level = Level(level)
    if level is Level.TRACT:
        raise ValueError("Gini is only defined above tract level")
    out = {}
    for unit, members in sorted(_units(hierarchy, level, hierarchy.tracts).items()):
        triples = [
            (t, populations[t], per_user[t])
            for t in members
            if per_user.get(t) is not None and populations.get(t) is not None
        ]
        try:
            out[unit] = gini_stu(triples)
        except DegenerateRegion as err:
            diagnostics.emit("DegenerateRegion", f"{level}:{unit}", str(err))
            out[unit] = None
    return out


def apply_crosswalk(values, crosswalk, strict=False, diagnostics=None):
    """Apportion additive values from source to target GEOIDs.

    ``values`` maps source GEOID -> number; each target receives
    ``sum(value * weight)``. Sources with no crosswalk row are reported
    (diagnostic, or ``UnmappedSource`` when strict) and dropped.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    by_source = defaultdict(list)
    for w in crosswalk:
        by_source[w.source_geoid].append(w)
    out = defaultdict(float)
    for src in sorted(values):
        rows = by_source.get(src)
        if not rows:
            if strict:
                raise UnmappedSource(f"no crosswalk entry for {src}")
            diagnostics.emit("UnmappedSource", src, "")
            continue
        for w in rows:
            out[w.target_geoid] += values[src] * w.weight
    return dict(sorted(out.items()))
