"""Seeded synthetic foot-traffic data with a visit-level ledger, and oracles.

``generate`` simulates individual visits (home block group, place, exact
dwell minutes) and derives every input file from them. ``oracle_measures``
recomputes all output measures by enumerating the ledger directly, without
going through the pattern files, so the two can be compared.

Random streams are split per entity with ``numpy.random.SeedSequence``
spawn keys, so one tract's draws do not depend on how many tracts exist.
"""

import configparser
import csv
import dataclasses
import datetime as dt
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats as sps

from . import ingest
from .aggregate import Level, UPPER_LEVELS
from .ingest import (
    ALL,
    CATEGORIES,
    ActivityCategory,
    CategoryMap,
    CrosswalkWeight,
    GeoHierarchy,
    PanelObservation,
    PoiRecord,
    TractMembership,
    WeeklyPattern,
    month_of,
)
from .measures import DwellPolicy
from .records import column_name

# Six-digit NAICS codes per activity category (2017 NAICS titles).
DEFAULT_NAICS = {
    ActivityCategory.GROCERY: ("445110", "445120", "445230", "445291", "445299"),
    ActivityCategory.CONSUME: ("442110", "448140", "451110", "452210", "453220"),
    ActivityCategory.SPORTS: ("611620", "713910", "713920", "713930", "713940", "713950", "713990"),
    ActivityCategory.EVENTS: ("711211", "711212", "711219"),
    ActivityCategory.DINING: ("722310", "722320", "722330", "722410", "722511", "722513", "722514", "722515"),
    ActivityCategory.ARTS: ("711110", "711120", "711130", "711190", "712110", "712120",
                            "712130", "712190", "713110", "713120", "713210", "713290"),
    ActivityCategory.RELIGIOUS: ("813110",),
}

# Integer dwell minutes d fall in bucket b when EDGES[b-1] < d <= EDGES[b].
BUCKET_EDGES = (4, 10, 20, 60, 120, 240)

_TRACT, _POI, _WEEK_TRACT, _UNATTR, _PANEL, _GEO, _CORRUPT = range(7)


@dataclass
class SynthConfig:
    seed: int = 0
    n_tracts: int = 50
    n_counties: int = 5
    subdivisions_per_county: int = 2
    n_metros: int = 2
    metro_county_fraction: float = 0.8
    n_pois: int = 500
    n_weeks: int = 4
    start_week: str = "2023-01-23"
    state_fips: str = "06"
    # per-user weekly minutes per tract ~ lognormal(shape, scale)
    intensity_shape: float = 0.6
    urban_scale: float = 268.7
    rural_scale: float = 155.3
    urban_fraction: float = 0.7
    category_weights: tuple = (0.12, 0.22, 0.10, 0.04, 0.30, 0.12, 0.10)
    category_concentration: float = 30.0
    # per-POI dwell ~ lognormal(sigma, median), median drawn per POI
    dwell_median_range: tuple = (15.0, 90.0)
    dwell_sigma: float = 0.9
    population_range: tuple = (1500, 8000)
    coverage_mean: float = 0.05
    coverage_sd: float = 0.01
    unattributed_mean: float = 2.0
    colocation_rate: float = 0.05
    crosswalk_split_fraction: float = 0.1
    corruption_count: int = 0

    def __post_init__(self):
        self.category_weights = tuple(float(w) for w in self.category_weights)
        self.dwell_median_range = tuple(float(w) for w in self.dwell_median_range)
        self.population_range = tuple(int(w) for w in self.population_range)
        if len(self.category_weights) != len(CATEGORIES):
            raise ValueError("category_weights needs one weight per category")
        if dt.date.fromisoformat(self.start_week).weekday() != 0:
            raise ValueError("start_week must be a Monday")
        if self.n_tracts < 1 or self.n_pois < 1 or self.n_weeks < 1:
            raise ValueError("n_tracts, n_pois and n_weeks must be positive")
        if self.n_counties > self.n_tracts:
            raise ValueError("more counties than tracts")

    @property
    def weeks(self):
        start = dt.date.fromisoformat(self.start_week)
        return [start + dt.timedelta(weeks=w) for w in range(self.n_weeks)]

    @classmethod
    def from_ini(cls, text, section="synth"):
        """Read ``key = value`` lines from an INI section; tuples are comma lists."""
        parser = configparser.ConfigParser()
        parser.read_string(text)
        if not parser.has_section(section):
            return cls()
        return cls.from_mapping(dict(parser[section]))

    @classmethod
    def from_mapping(cls, mapping):
        kwargs = {}
        types = {f.name: f.default for f in dataclasses.fields(cls)}
        for key, raw in mapping.items():
            if key not in types:
                raise ValueError(f"unknown synth config key {key!r}")
            default = types[key]
            if isinstance(raw, str):
                if isinstance(default, tuple):
                    raw = tuple(float(v) for v in raw.split(","))
                elif isinstance(default, bool):
                    raw = raw.strip().lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    raw = int(raw)
                elif isinstance(default, float):
                    raw = float(raw)
                else:
                    raw = raw.strip()
            kwargs[key] = raw
        return cls(**kwargs)

    def to_ini(self):
        lines = ["[synth]"]
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


@dataclass
class SynthData:
    config: SynthConfig
    catalog: list
    category_map: CategoryMap
    hierarchy: GeoHierarchy
    panel: list
    patterns: list
    ledger: pd.DataFrame
    urban: dict
    corrupted_rows: list = field(default_factory=list)

    def files(self):
        """File name -> text for every emitted file."""
        patterns = ingest.format_weekly_patterns(self.patterns)
        if self.config.corruption_count:
            patterns, self.corrupted_rows = inject_corruption(
                patterns, self.config.corruption_count, self.config.seed
            )
        return {
            "pois.csv": ingest.format_poi_catalog(self.catalog),
            "categories.csv": ingest.format_category_map(self.category_map),
            "hierarchy.csv": ingest.format_hierarchy(self.hierarchy),
            "crosswalk.csv": ingest.format_crosswalk(self.hierarchy.crosswalk),
            "panel.csv": ingest.format_panel(self.panel),
            "patterns.csv": patterns,
            "visits.csv": format_ledger(self.ledger),
            "tract_labels.csv": _format_labels(self.urban),
            "synth.ini": self.config.to_ini(),
        }

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, text in self.files().items():
            (directory / name).write_text(text, encoding="utf-8", newline="")
        return directory


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def bucket_index(minutes):
    """Bucket position (0..6) of integer dwell minutes."""
    return np.searchsorted(np.asarray(BUCKET_EDGES), np.asarray(minutes), side="left")


def _expected_bucketed_minutes(median, sigma, policy):
    # dwell = ceil(X), X ~ lognormal; P(bucket b) from the continuous edges
    cdf = sps.lognorm.cdf(np.asarray(BUCKET_EDGES, dtype=float), sigma, scale=median)
    probs = np.diff(np.concatenate(([0.0], cdf, [1.0])))
    return float(np.dot(probs, policy.minutes))


def _build_geography(cfg):
    rng = _rng(cfg.seed, _GEO)
    n_metro_counties = int(round(cfg.metro_county_fraction * cfg.n_counties)) if cfg.n_metros else 0
    metro_codes = [f"{31080 + 20 * m:05d}" for m in range(cfg.n_metros)]
    counties = [f"{cfg.state_fips}{2 * c + 1:03d}" for c in range(cfg.n_counties)]
    county_metro = {
        county: (metro_codes[c % cfg.n_metros] if c < n_metro_counties else None)
        for c, county in enumerate(counties)
    }
    # every county gets at least one tract
    county_of = list(range(cfg.n_counties)) + list(
        rng.integers(0, cfg.n_counties, cfg.n_tracts - cfg.n_counties)
    )
    county_of.sort()
    tracts = {}
    cbgs = {}
    serial = defaultdict(int)
    for t, c in enumerate(county_of):
        county = counties[c]
        serial[county] += 1
        tract = f"{county}{100 * serial[county]:06d}"
        sub = int(rng.integers(0, cfg.subdivisions_per_county))
        cousub = f"{county}{10000 + 100 * sub:05d}"
        tracts[tract] = TractMembership(cousub, county, county_metro[county])
        cbgs[tract] = [f"{tract}{b + 1}" for b in range(int(rng.integers(1, 4)))]

    crosswalk = []
    order = sorted(tracts)
    for i, tract in enumerate(order):
        if len(order) > 1 and rng.random() < cfg.crosswalk_split_fraction:
            other = order[(i + 1) % len(order)]
            w = round(float(rng.uniform(0.2, 0.8)), 3)
            crosswalk.append(CrosswalkWeight(tract, tract, w))
            crosswalk.append(CrosswalkWeight(tract, other, 1.0 - w))
        else:
            crosswalk.append(CrosswalkWeight(tract, tract, 1.0))
    return GeoHierarchy(tracts, crosswalk), cbgs


def _build_pois(cfg, tracts, policy):
    cats = list(CATEGORIES)
    catalog = []
    place_of = []
    place_tract = []
    dwell = []
    for j in range(cfg.n_pois):
        rng = _rng(cfg.seed, _POI, j)
        cat = cats[j % len(cats)]
        naics = DEFAULT_NAICS[cat][int(rng.integers(0, len(DEFAULT_NAICS[cat])))]
        if place_of and rng.random() < cfg.colocation_rate:
            place = place_of[int(rng.integers(0, len(place_of)))]
        else:
            place = len(place_tract)
            place_tract.append(tracts[int(rng.integers(0, len(tracts)))])
        place_of.append(place)
        lo, hi = cfg.dwell_median_range
        median = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        dwell.append(median)
        tract = place_tract[place]
        lat = 34.0 + int(tract[5:9]) * 1e-3 + place * 1e-6
        lon = -118.0 - int(tract[2:5]) * 1e-2 - place * 1e-6
        catalog.append(PoiRecord(
            poi_id=f"poi-{j:05d}",
            naics=naics,
            location=(round(lat, 6), round(lon, 6)),
            colocation_key=f"place-{place:05d}",
            tract_geoid=tract,
            open_date=dt.date(2018, 1, 1),
        ))
    expected = np.array([_expected_bucketed_minutes(m, cfg.dwell_sigma, policy) for m in dwell])
    return catalog, np.array(place_of), np.array(dwell), expected


def generate(config=None, policy=None):
    """Simulate visits and derive all pipeline inputs from them."""
    cfg = config or SynthConfig()
    policy = policy or DwellPolicy()
    hierarchy, cbgs = _build_geography(cfg)
    tracts = sorted(hierarchy.tracts)
    catalog, place_of, dwell_median, expected_rep = _build_pois(cfg, tracts, policy)
    n_places = int(place_of.max()) + 1
    cmap = CategoryMap({code: cat for cat, codes in DEFAULT_NAICS.items() for code in codes})

    cat_index = {c: i for i, c in enumerate(CATEGORIES)}
    poi_cat = np.array([cat_index[cmap[p.naics]] for p in catalog])
    pois_by_cat = [np.flatnonzero(poi_cat == k) for k in range(len(CATEGORIES))]
    rep_by_cat = np.array([
        expected_rep[idx].mean() if idx.size else np.nan for idx in pois_by_cat
    ])

    # tract-level draws
    weights = np.asarray(cfg.category_weights) / sum(cfg.category_weights)
    urban, intensity, shares, population, coverage = {}, {}, {}, {}, {}
    for t, tract in enumerate(tracts):
        rng = _rng(cfg.seed, _TRACT, t)
        urban[tract] = bool(rng.random() < cfg.urban_fraction)
        scale = cfg.urban_scale if urban[tract] else cfg.rural_scale
        intensity[tract] = scale * math.exp(cfg.intensity_shape * rng.standard_normal())
        shares[tract] = rng.dirichlet(cfg.category_concentration * weights)
        lo, hi = cfg.population_range
        population[tract] = int(rng.integers(lo, hi + 1))
        coverage[tract] = min(1.0, max(1e-3, rng.normal(cfg.coverage_mean, cfg.coverage_sd)))

    months = sorted({month_of(w) for w in cfg.weeks})
    panel, devices = [], {}
    for t, tract in enumerate(tracts):
        for m, month in enumerate(months):
            rng = _rng(cfg.seed, _PANEL, t, m)
            drift = 1.0 + 0.05 * rng.standard_normal()
            d = max(0, int(round(population[tract] * coverage[tract] * drift)))
            devices[(tract, month)] = d
            panel.append(PanelObservation(tract, month, d, population[tract]))

    cols = {"week_start": [], "home_cbg": [], "poi_id": [], "dwell_minutes": []}

    def emit(week, homes, poi, minutes):
        cols["week_start"].append(np.full(poi.size, week.isoformat(), dtype=object))
        cols["home_cbg"].append(homes)
        cols["poi_id"].append(poi)
        cols["dwell_minutes"].append(minutes)

    first_poi = {}
    for j, place in enumerate(place_of):
        first_poi.setdefault(int(place), j)
    for w, week in enumerate(cfg.weeks):
        month = month_of(week)
        for t, tract in enumerate(tracts):
            rng = _rng(cfg.seed, _WEEK_TRACT, w, t)
            lam = intensity[tract] * shares[tract] * devices[(tract, month)] / rep_by_cat
            counts = rng.poisson(np.where(np.isfinite(lam), lam, 0.0))
            n = int(counts.sum())
            if n == 0:
                continue
            poi = np.concatenate([
                pois_by_cat[k][rng.integers(0, pois_by_cat[k].size, c)]
                for k, c in enumerate(counts) if c
            ])
            minutes = _draw_minutes(rng, dwell_median[poi], cfg.dwell_sigma)
            homes = np.array(cbgs[tract], dtype=object)[rng.integers(0, len(cbgs[tract]), n)]
            emit(week, homes, poi, minutes)
        for place in range(n_places):
            rng = _rng(cfg.seed, _UNATTR, w, place)
            n = int(rng.poisson(cfg.unattributed_mean))
            if n == 0:
                continue
            first = first_poi[place]
            poi = np.full(n, first)
            minutes = _draw_minutes(rng, dwell_median[poi], cfg.dwell_sigma)
            emit(week, np.full(n, "", dtype=object), poi, minutes)

    ledger = pd.DataFrame({
        k: (np.concatenate(v) if v else np.array([], dtype=object if k != "dwell_minutes" else np.int64))
        for k, v in cols.items()
    })
    poi_ids = np.array([p.poi_id for p in catalog], dtype=object)
    place_keys = np.array([p.colocation_key for p in catalog], dtype=object)
    idx = ledger["poi_id"].to_numpy(dtype=np.int64)
    ledger["place_key"] = place_keys[idx]
    ledger["poi_id"] = poi_ids[idx]
    ledger["dwell_minutes"] = ledger["dwell_minutes"].astype(np.int64)
    ledger = ledger[["week_start", "home_cbg", "place_key", "poi_id", "dwell_minutes"]]

    patterns = patterns_from_ledger(ledger, catalog)
    return SynthData(cfg, catalog, cmap, hierarchy, panel, patterns, ledger, urban)


def _draw_minutes(rng, medians, sigma):
    x = medians * np.exp(sigma * rng.standard_normal(medians.size))
    return np.maximum(1, np.ceil(x)).astype(np.int64)


def patterns_from_ledger(ledger, catalog):
    """Weekly patterns as the vendor would report them.

    Every POI of a co-located place receives an identical copy of the whole
    place's record.
    """
    members = defaultdict(list)
    for p in catalog:
        members[p.colocation_key].append(p.poi_id)
    out = []
    if ledger.empty:
        return out
    df = ledger.assign(bucket=bucket_index(ledger["dwell_minutes"].to_numpy()))
    raw = df.groupby(["week_start", "place_key"]).size()
    buckets = df.groupby(["week_start", "place_key", "bucket"]).size()
    homes = df[df["home_cbg"] != ""].groupby(["week_start", "place_key", "home_cbg"]).size()
    bucket_rows = defaultdict(lambda: [0] * 7)
    for (week, place, b), n in buckets.items():
        bucket_rows[(week, place)][int(b)] = int(n)
    home_rows = defaultdict(dict)
    for (week, place, cbg), n in homes.items():
        home_rows[(week, place)][str(cbg)] = int(n)
    for (week, place), n in raw.items():
        for poi_id in members[place]:
            out.append(WeeklyPattern(
                poi_id=poi_id,
                week_start=dt.date.fromisoformat(week),
                raw_visits=int(n),
                dwell_buckets=tuple(bucket_rows[(week, place)]),
                home_areas=dict(home_rows[(week, place)]),
            ))
    out.sort(key=lambda p: (p.week_start, p.poi_id))
    return out


LEDGER_COLUMNS = ("week_start", "home_cbg", "place_key", "poi_id", "dwell_minutes")


def format_ledger(ledger):
    buf = io.StringIO()
    ledger.to_csv(buf, index=False, columns=list(LEDGER_COLUMNS), lineterminator="\n")
    return buf.getvalue()


def read_ledger(stream):
    return pd.read_csv(stream, dtype={"week_start": str, "home_cbg": str, "place_key": str,
                                      "poi_id": str, "dwell_minutes": np.int64},
                       keep_default_na=False)


def _format_labels(urban):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("tract_geoid", "urban"))
    for tract in sorted(urban):
        writer.writerow((tract, int(urban[tract])))
    return buf.getvalue()


def inject_corruption(patterns_csv, count, seed):
    """Break the dwell_buckets object of ``count`` data rows.

    Returns the corrupted text and the 1-based row numbers that were broken.
    """
    rows = list(csv.reader(io.StringIO(patterns_csv)))
    header, body = rows[0], rows[1:]
    if count > len(body):
        raise ValueError(f"cannot corrupt {count} of {len(body)} rows")
    col = header.index("dwell_buckets")
    rng = _rng(seed, _CORRUPT)
    picked = sorted(int(i) for i in rng.choice(len(body), size=count, replace=False))
    breakers = (
        lambda s: s[: len(s) // 2],
        lambda s: s.replace('"<5"', '"<4"'),
        lambda s: s.replace(":", ";", 1),
        lambda s: json.dumps(list(json.loads(s).values())),
    )
    for k, i in enumerate(picked):
        body[i][col] = breakers[k % len(breakers)](body[i][col])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    return buf.getvalue(), [i + 1 for i in picked]


# -- oracle ------------------------------------------------------------------


def _visit_table(ledger, catalog, category_map, policy):
    """One row per (visit, member POI) with the visit's credited share."""
    rep = np.asarray(policy.minutes)[bucket_index(ledger["dwell_minutes"].to_numpy())]
    visits = ledger.assign(rep=rep)
    place = visits.groupby(["week_start", "place_key"])["rep"].agg(["sum", "count"])
    place["mean_rep"] = place["sum"] / place["count"]
    visits = visits.join(place["mean_rep"], on=["week_start", "place_key"])
    visits = visits[visits["home_cbg"] != ""]

    rows = [
        (p.colocation_key, p.naics, category_map[p.naics].value)
        for p in catalog if p.naics in category_map
    ]
    members = pd.DataFrame(rows, columns=["place_key", "naics", "category"])
    size = pd.Series([p.colocation_key for p in catalog]).value_counts()
    members["share"] = 1.0 / members["place_key"].map(size).to_numpy()
    table = visits.merge(members, on="place_key", how="inner")
    table["minutes"] = table["mean_rep"] * table["share"]
    table["tract"] = table["home_cbg"].str[:11]
    return table


def oracle_measures(ledger, catalog, category_map, panel, hierarchy, policy=None):
    """Every output value, recomputed from individual visits.

    Each visit is credited with its place's mean bucketed dwell and split
    evenly across the place's POIs. Returns ``{level: {(geoid, week):
    {column: value}}}`` using the output column names; absent values are
    omitted.
    """
    policy = policy or DwellPolicy()
    table = _visit_table(ledger, catalog, category_map, policy)
    by_cat = table.groupby(["week_start", "tract", "category"])[["minutes", "share"]].sum()
    by_sector = table.groupby(["week_start", "tract", "naics"])["minutes"].sum()

    devices = {(o.geoid, o.month): o.device_count for o in panel}
    pops = {(o.geoid, o.month): o.population for o in panel}
    weeks = sorted(ledger["week_start"].unique()) if len(ledger) else []

    minutes = defaultdict(float)
    visits = defaultdict(float)
    for (week, tract, cat), row in by_cat.iterrows():
        minutes[(week, tract, cat)] += row["minutes"]
        visits[(week, tract, cat)] += row["share"]
    sectors = defaultdict(dict)
    for (week, tract, naics), m in by_sector.items():
        if m > 0:
            sectors[(week, tract)][naics] = m
    seen = defaultdict(set)
    for week, tract, _ in minutes:
        seen[week].add(tract)

    out = {level: {} for level in Level}
    cat_names = [c.value for c in CATEGORIES]
    for week in weeks:
        month = month_of(dt.date.fromisoformat(week))
        universe = sorted(set(hierarchy.tracts) | seen[week])
        tract_t = {t: {c: minutes.get((week, t, c), 0.0) for c in cat_names} for t in universe}
        tract_v = {t: {c: visits.get((week, t, c), 0.0) for c in cat_names} for t in universe}
        tract_d = {t: devices.get((t, month)) for t in universe}
        tract_h = {}
        for t in universe:
            prof = sectors.get((week, t))
            if prof:
                p = np.array(list(prof.values()))
                p = p / p.sum()
                tract_h[t] = float(-np.sum(p * np.log(p)))

        for t in universe:
            out[Level.TRACT][(t, week)] = _oracle_row(
                [t], tract_t, tract_v, tract_d, cat_names, tract_h.get(t)
            )

        for level in UPPER_LEVELS:
            units = defaultdict(list)
            for t in universe:
                u = hierarchy.unit_of(t, level.value)
                if u is not None:
                    units[u].append(t)
            for unit, members in sorted(units.items()):
                num = sum(tract_h[t] * tract_d[t] for t in members if t in tract_h and tract_d[t])
                den = sum(tract_d[t] for t in members if t in tract_h and tract_d[t])
                row = _oracle_row(members, tract_t, tract_v, tract_d, cat_names,
                                  num / den if den else None)
                g = _oracle_gini(members, tract_t, tract_d, pops, month)
                if g is not None:
                    row["Gini"] = g
                out[level][(unit, week)] = row
    return out


def _oracle_row(members, tract_t, tract_v, tract_d, cat_names, diversity):
    row = {}
    with_devices = [t for t in members if tract_d.get(t)]
    d_total = sum(tract_d[t] for t in with_devices)
    for key in (ALL,) + tuple(cat_names):
        cats = cat_names if key == ALL else [key]
        if d_total:
            row[column_name("Per_User_STU", key)] = (
                sum(tract_t[t][c] for t in with_devices for c in cats) / d_total
            )
        v = sum(tract_v[t][c] for t in members for c in cats)
        if v > 0:
            row[column_name("Per_Visit_STU", key)] = (
                sum(tract_t[t][c] for t in members for c in cats) / v
            )
    if diversity is not None:
        row["Diversity"] = diversity
    return row


def _oracle_gini(members, tract_t, tract_d, pops, month):
    x, w = [], []
    for t in members:
        d = tract_d.get(t)
        pop = pops.get((t, month))
        if d and pop is not None:
            x.append(sum(tract_t[t].values()) / d)
            w.append(pop)
    if len(x) < 2 or sum(w) <= 0:
        return None
    x, p = np.array(x), np.array(w, dtype=float) / sum(w)
    mu = float(np.sum(p * x))
    if mu <= 0:
        return None
    return float(np.sum(np.outer(p, p) * np.abs(x[:, None] - x[None, :])) / (2 * mu))


def bucketing_loss(ledger, policy=None):
    """Exact versus bucketed visit minutes per week (information lost to binning)."""
    policy = policy or DwellPolicy()
    rep = np.asarray(policy.minutes)[bucket_index(ledger["dwell_minutes"].to_numpy())]
    df = ledger.assign(bucketed=rep)
    out = df.groupby("week_start").agg(exact=("dwell_minutes", "sum"), bucketed=("bucketed", "sum"))
    out["ratio"] = out["bucketed"] / out["exact"]
    return out


def per_user_samples(ledger, catalog, category_map, panel, policy=None):
    """Tract per-user minutes (all categories) for every tract-week of the ledger."""
    policy = policy or DwellPolicy()
    table = _visit_table(ledger, catalog, category_map, policy)
    totals = table.groupby(["week_start", "tract"])["minutes"].sum()
    devices = {(o.geoid, o.month): o.device_count for o in panel}
    out = []
    for (week, tract), m in totals.items():
        d = devices.get((tract, month_of(dt.date.fromisoformat(week))))
        if d:
            out.append(m / d)
    return np.array(out)

