"""Per-POI dwell totals and the tract-level per-user / per-visit measures."""

import dataclasses
import logging
from collections import defaultdict
from dataclasses import dataclass, field

from . import ingest
from .diagnostics import Diagnostics
from .errors import MissingPanelMonth, MixedWeeksInGroup, UnknownPoi
from .ingest import ALL, CATEGORIES, cbg_to_tract, month_of

log = logging.getLogger(__name__)

# Closed minute ranges [0,4], [5,10], [11,20], [21,60], [61,120], [121,240].
BOUNDED_MIDPOINTS = (2.0, 7.5, 15.5, 40.5, 90.5, 180.5)
DEFAULT_OPEN_BUCKET = 240.0


@dataclass(frozen=True)
class DwellPolicy:
    """Representative minutes for each of the seven dwell buckets."""

    minutes: tuple = BOUNDED_MIDPOINTS + (DEFAULT_OPEN_BUCKET,)

    def __post_init__(self):
        m = tuple(float(x) for x in self.minutes)
        if len(m) != len(ingest.BUCKET_LABELS):
            raise ValueError(f"dwell policy needs {len(ingest.BUCKET_LABELS)} values, got {len(m)}")
        if any(x <= 0 for x in m):
            raise ValueError("dwell policy values must be positive")
        if any(b <= a for a, b in zip(m, m[1:])):
            raise ValueError("dwell policy values must be strictly increasing")
        if m[-1] < 240:
            raise ValueError("open-bucket value must be >= 240 minutes")
        object.__setattr__(self, "minutes", m)

    @classmethod
    def with_open_bucket(cls, minutes):
        return cls(BOUNDED_MIDPOINTS + (float(minutes),))

    @classmethod
    def parse(cls, text):
        """Build from 7 comma-separated reals."""
        return cls(tuple(float(x) for x in text.split(",")))

    @property
    def open_bucket(self):
        return self.minutes[-1]


@dataclass(frozen=True)
class TractCategoryTime:
    tract_geoid: str
    week_start: object
    category: ingest.ActivityCategory
    total_minutes: float
    attributed_visits: float


@dataclass
class FoundationalStu:
    tract_geoid: str
    week_start: object
    per_user: dict | None
    per_visit: dict
    device_count: int | None
    total_attributed_visits: float
    category_minutes: dict = field(default_factory=dict)
    category_visits: dict = field(default_factory=dict)


def expected_poi_dwell_total(pattern, policy=DwellPolicy()):
    """Total bucketed visit minutes at one POI-week."""
    return sum(m * n for m, n in zip(policy.minutes, pattern.dwell_buckets))


def _scaled(pattern, factor):
    return dataclasses.replace(
        pattern,
        raw_visits=pattern.raw_visits * factor,
        dwell_buckets=tuple(n * factor for n in pattern.dwell_buckets),
        home_areas={g: n * factor for g, n in pattern.home_areas.items()},
    )


def _same_counts(a, b):
    return (
        a.raw_visits == b.raw_visits
        and a.dwell_buckets == b.dwell_buckets
        and a.home_areas == b.home_areas
    )


def dedup_colocated(patterns, catalog, diagnostics=None):
    """Split duplicated co-located POI records evenly across their group.

    Patterns are grouped by (colocation_key, week_start); every count of a
    group of ``g`` members is scaled by ``1/g``. Groups whose members are not
    identical are still scaled, with a ``NonIdenticalColocatedGroup``
    diagnostic. POIs missing from ``catalog`` pass through unchanged.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    key_of = {p.poi_id: p.colocation_key for p in _poi_list(catalog)}
    groups = defaultdict(list)
    for idx, pat in enumerate(patterns):
        key = key_of.get(pat.poi_id)
        groups[(key, pat.week_start) if key is not None else ("", idx)].append(idx)

    out = list(patterns)
    for (key, _), members in groups.items():
        if len(members) > 1:
            scaled = dedup_group([out[i] for i in members], key, diagnostics)
            for i, p in zip(members, scaled):
                out[i] = p
    return out


def dedup_group(group, key="", diagnostics=None):
    """Scale one co-located group (same key, same week) by ``1/len(group)``."""
    group = list(group)
    if len({p.week_start for p in group}) > 1:
        raise MixedWeeksInGroup(f"group {key!r} spans weeks {sorted({p.week_start for p in group})}")
    if len(group) < 2:
        return group
    if diagnostics is not None and any(not _same_counts(group[0], p) for p in group[1:]):
        diagnostics.emit("NonIdenticalColocatedGroup", key or group[0].poi_id,
                         f"{len(group)} members, week {group[0].week_start}")
    return [_scaled(p, 1.0 / len(group)) for p in group]


def _poi_list(catalog):
    return catalog.values() if isinstance(catalog, dict) else catalog


def _poi_index(catalog):
    if isinstance(catalog, dict):
        return catalog
    return {p.poi_id: p for p in catalog}


@dataclass
class TractWeek:
    """Accumulated visit-weighted minutes for one week, keyed by tract."""

    week_start: object
    minutes: dict = field(default_factory=lambda: defaultdict(lambda: defaultdict(float)))
    visits: dict = field(default_factory=lambda: defaultdict(lambda: defaultdict(float)))
    sectors: dict = field(default_factory=lambda: defaultdict(lambda: defaultdict(float)))

    def category_times(self):
        out = []
        for tract in sorted(self.minutes):
            for cat in CATEGORIES:
                if cat in self.visits[tract]:
                    out.append(TractCategoryTime(
                        tract, self.week_start, cat,
                        self.minutes[tract][cat], self.visits[tract][cat],
                    ))
        return out


def accumulate_week(patterns, catalog, category_map, policy=DwellPolicy(),
                    strict=False, diagnostics=None):
    """Visit-weighted minutes by (tract, category) and (tract, NAICS sector).

    Each POI contributes ``T_j * V_ij / V_j`` to every home tract ``i``, where
    ``V_ij`` rolls block groups up to tracts and ``V_j`` is the POI's total
    visit count (unattributed visits stay in the denominator). POIs with no
    visits contribute nothing.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    pois = _poi_index(catalog)
    weeks = {p.week_start for p in patterns}
    if len(weeks) > 1:
        raise ValueError(f"accumulate_week got several weeks: {sorted(weeks)}")
    acc = TractWeek(next(iter(weeks)) if weeks else None)

    for pat in patterns:
        poi = pois.get(pat.poi_id)
        if poi is None:
            if strict:
                raise UnknownPoi(f"poi {pat.poi_id!r} not in catalog")
            diagnostics.emit("UnknownPoi", pat.poi_id, pat.week_start.isoformat())
            continue
        cat = category_map.get(poi.naics)
        if cat is None:
            diagnostics.emit("OutOfScopeNaics", pat.poi_id, poi.naics)
            continue
        if pat.raw_visits == 0:
            continue
        total = expected_poi_dwell_total(pat, policy)
        by_tract = defaultdict(float)
        for cbg, n in pat.home_areas.items():
            by_tract[cbg_to_tract(cbg)] += n
        for tract, v in by_tract.items():
            share = total * v / pat.raw_visits
            acc.minutes[tract][cat] += share
            acc.visits[tract][cat] += v
            acc.sectors[tract][poi.naics] += share
    return acc


def tract_category_time(patterns, catalog, category_map, policy=DwellPolicy(),
                        strict=False, diagnostics=None):
    """TractCategoryTime rows for every week present in ``patterns``."""
    by_week = defaultdict(list)
    for p in patterns:
        by_week[p.week_start].append(p)
    out = []
    for week in sorted(by_week):
        acc = accumulate_week(by_week[week], catalog, category_map, policy, strict, diagnostics)
        out.extend(acc.category_times())
    return out


def panel_lookup(panel):
    """(geoid, month) -> PanelObservation."""
    return {(o.geoid, o.month): o for o in panel}


def foundational_stu(tract_times, panel, week, tracts=(), strict=False, diagnostics=None):
    """Per-user and per-visit minutes for every tract of one week.

    ``tract_times`` are TractCategoryTime rows for ``week``; ``tracts`` adds
    tracts with no visits (they get zero per-user time). ``panel`` is a
    sequence of PanelObservation or a mapping from :func:`panel_lookup`;
    the month containing the week's Monday supplies the device count.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    lookup = panel if isinstance(panel, dict) else panel_lookup(panel)
    month = month_of(week)

    minutes = defaultdict(dict)
    visits = defaultdict(dict)
    for row in tract_times:
        if row.week_start != week:
            continue
        minutes[row.tract_geoid][row.category] = row.total_minutes
        visits[row.tract_geoid][row.category] = row.attributed_visits

    out = {}
    for tract in sorted(set(minutes) | set(tracts)):
        t = {k: minutes[tract].get(k, 0.0) for k in CATEGORIES}
        v = {k: visits[tract].get(k, 0.0) for k in CATEGORIES}
        t_all = sum(t.values())
        v_all = sum(v.values())

        obs = lookup.get((tract, month))
        devices = None if obs is None else obs.device_count
        per_user = None
        if obs is None:
            if strict:
                raise MissingPanelMonth(f"no panel record for tract {tract} in {month}")
            diagnostics.emit("MissingPanelMonth", tract, month)
        elif devices == 0:
            diagnostics.emit("ZeroDevices", tract, month)
        else:
            per_user = {k: t[k] / devices for k in CATEGORIES}
            per_user[ALL] = t_all / devices

        per_visit = {k: t[k] / v[k] for k in CATEGORIES if v[k] > 0}
        if v_all > 0:
            per_visit[ALL] = t_all / v_all

        out[tract] = FoundationalStu(
            tract_geoid=tract,
            week_start=week,
            per_user=per_user,
            per_visit=per_visit,
            device_count=devices,
            total_attributed_visits=v_all,
            category_minutes=t,
            category_visits=v,
        )
    return out
