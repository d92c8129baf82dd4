import dataclasses
import datetime as dt
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stutime import measures, pipeline, synth
from stutime.diagnostics import Diagnostics
from stutime.errors import MissingPanelMonth, MixedWeeksInGroup, UnknownPoi
from stutime.ingest import ALL, ActivityCategory, CategoryMap, PanelObservation, PoiRecord
from stutime.measures import DwellPolicy, expected_poi_dwell_total

from .conftest import MONDAY, pattern

DINING = ActivityCategory.DINING
ARTS = ActivityCategory.ARTS
CMAP = CategoryMap({"722511": DINING, "712110": ARTS})


def poi(pid, naics="722511", key=None, tract="06001000100"):
    return PoiRecord(pid, naics, (0.0, 0.0), key or pid, tract)


def panel(devices, tract="06001000100", month="2023-01", pop=1000):
    return PanelObservation(tract, month, devices, pop)


# -- dwell totals -------------------------------------------------------------

def test_dwell_total_zero():
    assert expected_poi_dwell_total(pattern(raw=0)) == 0


def test_dwell_total_two_buckets():
    assert expected_poi_dwell_total(pattern(buckets={"<5": 4, "5-10": 2})) == 23.0


def test_dwell_total_open_bucket():
    p = pattern(buckets={">240": 3})
    assert expected_poi_dwell_total(p) == 720.0
    assert expected_poi_dwell_total(p, DwellPolicy.with_open_bucket(300)) == 900.0


@pytest.mark.parametrize("bad", ["1,2,3", "2,7.5,15.5,40.5,90.5,180.5,200", "2,2,15.5,40.5,90.5,180.5,240"])
def test_policy_validation(bad):
    with pytest.raises(ValueError):
        DwellPolicy.parse(bad)


# -- co-location ----------------------------------------------------------------

def test_dedup_singleton_unchanged():
    p = pattern("a", raw=30, buckets={"<5": 30}, homes={"060010001001": 30})
    assert measures.dedup_colocated([p], [poi("a")]) == [p]


def test_dedup_three_identical():
    cat = [poi(x, key="mall") for x in "abc"]
    group = [pattern(x, raw=30, buckets={"<5": 30}, homes={"060010001001": 12}) for x in "abc"]
    diag = Diagnostics()
    out = measures.dedup_colocated(group, cat, diag)
    assert [p.raw_visits for p in out] == [10, 10, 10]
    assert all(p.dwell_buckets[0] == 10 and p.home_areas["060010001001"] == 4 for p in out)
    assert diag.count("NonIdenticalColocatedGroup") == 0


def test_dedup_non_identical_still_halved():
    cat = [poi("a", key="k"), poi("b", key="k")]
    group = [pattern("a", raw=4, buckets={"<5": 4}), pattern("b", raw=4, buckets={"5-10": 4})]
    diag = Diagnostics()
    out = measures.dedup_colocated(group, cat, diag)
    assert [p.raw_visits for p in out] == [2, 2]
    assert out[1].dwell_buckets[1] == 2
    assert diag.count("NonIdenticalColocatedGroup") == 1


def test_dedup_mixed_weeks():
    group = [pattern("a"), pattern("b", week=MONDAY + dt.timedelta(days=7))]
    with pytest.raises(MixedWeeksInGroup):
        measures.dedup_group(group, "k")


def test_dedup_groups_split_by_week():
    cat = [poi("a", key="k"), poi("b", key="k")]
    later = MONDAY + dt.timedelta(days=7)
    out = measures.dedup_colocated([pattern("a", raw=6), pattern("b", raw=6, week=later)], cat)
    assert [p.raw_visits for p in out] == [6, 6]


def test_dedup_neutrality():
    # a place of g identical duplicated records contributes what one record does
    base = pattern("solo", raw=20, buckets={"<5": 5, "21-60": 15}, homes={"060010001001": 8, "060010002001": 4})
    solo = measures.accumulate_week([base], [poi("solo")], CMAP)
    for g in (2, 3, 5):
        ids = [f"d{i}" for i in range(g)]
        cat = [poi(i, key="shared") for i in ids]
        dup = [dataclasses.replace(base, poi_id=i) for i in ids]
        acc = measures.accumulate_week(measures.dedup_colocated(dup, cat), cat, CMAP)
        for tract in solo.minutes:
            assert acc.minutes[tract][DINING] == pytest.approx(solo.minutes[tract][DINING], rel=1e-12)
            assert acc.visits[tract][DINING] == pytest.approx(solo.visits[tract][DINING], rel=1e-12)


# -- tract attribution ------------------------------------------------------------

def test_proportional_attribution():
    # T_j = 100 with 10 visits, 5 from the tract
    p = pattern("a", raw=10, homes={"060010001001": 5})
    p = dataclasses.replace(p, dwell_buckets=(50, 0, 0, 0, 0, 0, 0))
    assert expected_poi_dwell_total(p) == 100
    rows = measures.tract_category_time([p], [poi("a")], CMAP)
    assert len(rows) == 1
    assert rows[0].tract_geoid == "06001000100"
    assert rows[0].total_minutes == 50
    assert rows[0].attributed_visits == 5


def test_block_groups_roll_up():
    p = pattern("a", raw=5, buckets={"<5": 5}, homes={"060010001001": 3, "060010001002": 2})
    rows = measures.tract_category_time([p], [poi("a")], CMAP)
    assert [(r.tract_geoid, r.attributed_visits) for r in rows] == [("06001000100", 5)]


def test_zero_visit_poi_contributes_nothing():
    rows = measures.tract_category_time([pattern("a", raw=0)], [poi("a")], CMAP)
    assert rows == []


def test_unknown_poi():
    diag = Diagnostics()
    assert measures.tract_category_time([pattern("zz")], [poi("a")], CMAP, diagnostics=diag) == []
    assert diag.count("UnknownPoi") == 1
    with pytest.raises(UnknownPoi):
        measures.tract_category_time([pattern("zz")], [poi("a")], CMAP, strict=True)


def test_out_of_scope_naics():
    diag = Diagnostics()
    rows = measures.tract_category_time([pattern("a", homes={"060010001001": 2})], [poi("a", naics="111110")],
                                        CMAP, diagnostics=diag)
    assert rows == [] and diag.count("OutOfScopeNaics") == 1


def test_random_fixture_matches_oracle():
    cfg = synth.SynthConfig(seed=21, n_tracts=10, n_counties=2, n_pois=20, n_weeks=1)
    data = synth.generate(cfg)
    inputs = pipeline.Inputs(data.patterns, data.catalog, data.category_map, data.hierarchy, data.panel)
    tract = pipeline.compute(inputs, levels=["tract"]).tables
    oracle = synth.oracle_measures(data.ledger, data.catalog, data.category_map, data.panel, data.hierarchy)
    got = {(r.geoid, r.timestamp.isoformat()): r.values for rows in tract["tract"].values() for r in rows}
    want = oracle["tract"]
    assert set(got) == set(want)
    for key, cols in want.items():
        for col, v in cols.items():
            assert got[key].get(col) == pytest.approx(v, rel=1e-9, abs=1e-12), (key, col)


# -- per-user / per-visit -------------------------------------------------------------

def _times(minutes, visits, cat=DINING, tract="06001000100"):
    return [measures.TractCategoryTime(tract, MONDAY, cat, minutes, visits)]


def test_per_user_division():
    out = measures.foundational_stu(_times(500, 40), [panel(50)], MONDAY)
    stu = out["06001000100"]
    assert stu.per_user[DINING] == 10.0
    assert stu.per_user[ALL] == 10.0
    assert stu.per_user[ARTS] == 0.0


def test_per_visit_all():
    rows = _times(100, 10) + _times(200, 20, cat=ARTS)
    stu = measures.foundational_stu(rows, [panel(5)], MONDAY)["06001000100"]
    assert stu.per_visit[ALL] == 10.0
    assert ARTS in stu.per_visit and ActivityCategory.GROCERY not in stu.per_visit


def test_zero_devices():
    diag = Diagnostics()
    stu = measures.foundational_stu(_times(300, 30), [panel(0)], MONDAY, diagnostics=diag)["06001000100"]
    assert stu.per_user is None
    assert stu.per_visit[ALL] == 10.0
    assert diag.count("ZeroDevices") == 1


def test_missing_panel_month():
    with pytest.raises(MissingPanelMonth):
        measures.foundational_stu(_times(300, 30), [panel(10, month="2022-12")], MONDAY, strict=True)
    diag = Diagnostics()
    stu = measures.foundational_stu(_times(300, 30), [], MONDAY, diagnostics=diag)["06001000100"]
    assert stu.per_user is None and diag.count("MissingPanelMonth") == 1


def test_month_is_taken_from_monday():
    # week of 2023-01-30 runs into February but belongs to January
    week = dt.date(2023, 1, 30)
    rows = [measures.TractCategoryTime("06001000100", week, DINING, 100, 10)]
    stu = measures.foundational_stu(rows, [panel(10), panel(99, month="2023-02")], week)
    assert stu["06001000100"].per_user[ALL] == 10.0


def test_silent_tract_gets_zero_per_user():
    out = measures.foundational_stu([], [panel(10)], MONDAY, tracts=["06001000100"])
    assert out["06001000100"].per_user[ALL] == 0.0
    assert out["06001000100"].per_visit == {}


# -- properties ------------------------------------------------------------------

counts = st.lists(st.integers(0, 40), min_size=7, max_size=7)
homes = st.dictionaries(st.sampled_from(["060010001001", "060010001002", "060010002001", "060010003001"]),
                        st.integers(1, 30), min_size=1, max_size=4)


@st.composite
def week_patterns(draw):
    out = []
    for i in range(draw(st.integers(1, 5))):
        buckets = draw(counts)
        h = draw(homes)
        raw = max(sum(buckets), sum(h.values()))
        buckets[0] += raw - sum(buckets)
        p = pattern(f"p{i}", raw=raw, homes=h)
        out.append(dataclasses.replace(p, dwell_buckets=tuple(buckets)))
    return out


CATALOG = [poi(f"p{i}", naics=("722511", "712110")[i % 2]) for i in range(5)]
PANEL = [panel(7, t) for t in ("06001000100", "06001000200", "06001000300")]


def _stu(patterns, policy=DwellPolicy()):
    acc = measures.accumulate_week(patterns, CATALOG, CMAP, policy)
    return acc, measures.foundational_stu(acc.category_times(), PANEL, MONDAY)


@settings(max_examples=60, deadline=None)
@given(week_patterns(), st.floats(0.01, 1000))
def test_scale_equivariance(pats, c):
    acc, stu = _stu(pats)
    scaled = [measures._scaled(p, c) for p in pats]
    acc_c, stu_c = _stu(scaled)
    for tract in acc.minutes:
        for cat, m in acc.minutes[tract].items():
            assert acc_c.minutes[tract][cat] == pytest.approx(c * m, rel=1e-9)
    for tract, s in stu.items():
        for k, v in s.per_visit.items():
            assert stu_c[tract].per_visit[k] == pytest.approx(v, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(week_patterns())
def test_category_partition_and_bounds(pats):
    _, stu = _stu(pats)
    for s in stu.values():
        parts = [v for k, v in s.per_user.items() if k != ALL]
        assert s.per_user[ALL] == pytest.approx(math.fsum(parts), rel=1e-12, abs=1e-12)
        if s.total_attributed_visits > 0:
            pv = s.per_visit[ALL]
            assert 2.0 - 1e-9 <= pv <= 240.0 + 1e-9
            mixed = math.fsum(s.per_visit[k] * s.category_visits[k] for k in s.per_visit if k != ALL)
            assert pv == pytest.approx(mixed / s.total_attributed_visits, rel=1e-9)
