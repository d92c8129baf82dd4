import io
import math
from collections import Counter, defaultdict

import pandas as pd
import pytest

from stutime import pipeline, stats, synth
from stutime.cli import compare_to_oracle
from stutime.dispersion import gini_stu
from stutime.ingest import (
    CATEGORIES,
    ActivityCategory,
    CategoryMap,
    GeoHierarchy,
    PanelObservation,
    PoiRecord,
    TractMembership,
    parse_weekly_patterns,
)

from .conftest import MONDAY

# closed minute ranges of the seven buckets, the last one open
RANGES = [(0, 4), (5, 10), (11, 20), (21, 60), (61, 120), (121, 240), (241, math.inf)]


def bin_minutes(m):
    return next(i for i, (lo, hi) in enumerate(RANGES) if lo <= m <= hi)


def test_same_seed_same_bytes():
    cfg = synth.SynthConfig(seed=77, n_tracts=8, n_counties=2, n_pois=40, n_weeks=2)
    assert synth.generate(cfg).files() == synth.generate(cfg).files()


def test_seed_changes_output():
    a = synth.generate(synth.SynthConfig(seed=1, n_tracts=8, n_counties=2, n_pois=40, n_weeks=1))
    b = synth.generate(synth.SynthConfig(seed=2, n_tracts=8, n_counties=2, n_pois=40, n_weeks=1))
    assert a.files()["patterns.csv"] != b.files()["patterns.csv"]


def test_buckets_equal_ledger_binning(small_synth):
    key_of = {p.poi_id: p.colocation_key for p in small_synth.catalog}
    hist = defaultdict(lambda: [0] * 7)
    raw = Counter()
    homes = defaultdict(Counter)
    for row in small_synth.ledger.itertuples(index=False):
        k = (row.week_start, row.place_key)
        hist[k][bin_minutes(int(row.dwell_minutes))] += 1
        raw[k] += 1
        if row.home_cbg:
            homes[k][row.home_cbg] += 1
    assert small_synth.patterns
    for p in small_synth.patterns:
        k = (p.week_start.isoformat(), key_of[p.poi_id])
        assert list(p.dwell_buckets) == hist[k]
        assert p.raw_visits == raw[k]
        assert p.home_areas == dict(homes[k])


def test_bucket_index_edges():
    minutes = [0, 4, 5, 10, 11, 20, 21, 60, 61, 120, 121, 240, 241, 10_000]
    assert list(synth.bucket_index(minutes)) == [bin_minutes(m) for m in minutes]


def test_no_colocation():
    data = synth.generate(synth.SynthConfig(seed=3, n_tracts=10, n_counties=2, n_pois=80, n_weeks=1,
                                            colocation_rate=0.0))
    keys = [p.colocation_key for p in data.catalog]
    assert len(set(keys)) == len(keys)


def test_colocation_produces_duplicates(small_synth):
    sizes = Counter(p.colocation_key for p in small_synth.catalog)
    assert max(sizes.values()) > 1


def test_all_categories_present():
    data = synth.generate(synth.SynthConfig(seed=0))
    cats = {data.category_map[p.naics] for p in data.catalog}
    assert cats == set(CATEGORIES)
    assert len(data.catalog) == 500 and len(data.hierarchy.tracts) == 50


def test_ledger_round_trip(small_synth):
    text = synth.format_ledger(small_synth.ledger)
    back = synth.read_ledger(io.StringIO(text))
    pd.testing.assert_frame_equal(back[list(synth.LEDGER_COLUMNS)].reset_index(drop=True),
                                  small_synth.ledger[list(synth.LEDGER_COLUMNS)].reset_index(drop=True),
                                  check_dtype=False)


def test_config_ini_round_trip():
    cfg = synth.SynthConfig(seed=9, n_tracts=20, dwell_median_range=(10.0, 40.0), urban_fraction=0.5)
    assert synth.SynthConfig.from_ini(cfg.to_ini()) == cfg


def test_config_rejects_unknown_key():
    with pytest.raises(ValueError):
        synth.SynthConfig.from_ini("[synth]\nbogus = 1\n")


def test_config_rejects_non_monday():
    with pytest.raises(ValueError):
        synth.SynthConfig(start_week="2023-01-24")


def test_corruption_positions():
    data = synth.generate(synth.SynthConfig(seed=4, n_tracts=6, n_counties=2, n_pois=30, n_weeks=1,
                                            corruption_count=5))
    files = data.files()
    assert len(data.corrupted_rows) == 5
    parsed = parse_weekly_patterns(files["patterns.csv"])
    assert sorted(r for r, _ in parsed.skipped) == data.corrupted_rows


# -- oracle ----------------------------------------------------------------------

def _tiny_world(minutes_list, devices=1):
    tract = "06001000100"
    catalog = [PoiRecord("p", "722511", (0.0, 0.0), "p", tract)]
    cmap = CategoryMap({"722511": ActivityCategory.DINING})
    hier = GeoHierarchy({tract: TractMembership("0600110000", "06001", "31080")})
    panel = [PanelObservation(tract, "2023-01", devices, 100)]
    ledger = pd.DataFrame({
        "week_start": [MONDAY.isoformat()] * len(minutes_list),
        "home_cbg": [tract + "1"] * len(minutes_list),
        "place_key": ["p"] * len(minutes_list),
        "poi_id": ["p"] * len(minutes_list),
        "dwell_minutes": minutes_list,
    })
    return ledger, catalog, cmap, panel, hier


def test_oracle_single_visit():
    out = synth.oracle_measures(*_tiny_world([3]))
    row = out["tract"][("06001000100", MONDAY.isoformat())]
    assert row["Per_User_STU_all"] == 2.0
    assert row["Per_Visit_STU_all"] == 2.0
    assert row["Per_User_STU_Dining"] == 2.0
    assert row["Diversity"] == 0.0


def test_oracle_uses_bucket_representatives():
    # 3 visits: 2, 7.5 and 240 minutes, over 2 devices
    out = synth.oracle_measures(*_tiny_world([1, 9, 500], devices=2))
    row = out["tract"][("06001000100", MONDAY.isoformat())]
    assert row["Per_User_STU_all"] == pytest.approx((2 + 7.5 + 240) / 2)
    assert row["Per_Visit_STU_all"] == pytest.approx((2 + 7.5 + 240) / 3)


def test_bucketing_loss_reported(small_synth):
    loss = synth.bucketing_loss(small_synth.ledger)
    assert list(loss.index) == [w.isoformat() for w in small_synth.config.weeks]
    assert (loss["exact"] > 0).all() and (loss["ratio"] > 0).all()


def test_pipeline_matches_oracle_all_levels(small_synth, small_synth_dir, tmp_path):
    inputs = pipeline.load_inputs(small_synth_dir, strict=True)
    pipeline.write_outputs(pipeline.compute(inputs, strict=True), tmp_path)
    summary = compare_to_oracle(tmp_path, small_synth)
    for level, (n, worst, missing) in summary.items():
        assert n > 0, level
        assert missing == 0, level
        assert worst <= 1e-9, level


def test_oracle_gini_matches_pairwise(small_synth):
    out = synth.oracle_measures(small_synth.ledger, small_synth.catalog, small_synth.category_map,
                                small_synth.panel, small_synth.hierarchy)
    per_user = {k: v["Per_User_STU_all"] for k, v in out["tract"].items() if "Per_User_STU_all" in v}
    pops = {(o.geoid, o.month): o.population for o in small_synth.panel}
    checked = 0
    for (county, week), row in out["county"].items():
        if "Gini" not in row:
            continue
        members = [t for t in small_synth.hierarchy.tracts if small_synth.hierarchy.unit_of(t, "county") == county]
        units = [(t, pops[(t, week[:7])], per_user[(t, week)]) for t in members if (t, week) in per_user]
        assert row["Gini"] == pytest.approx(gini_stu(units), abs=1e-12)
        checked += 1
    assert checked > 0


@pytest.mark.slow
def test_lognormal_recovered_at_5000_tracts():
    cfg = synth.SynthConfig(seed=11, n_tracts=5000, n_counties=50, n_pois=140, n_weeks=1,
                            urban_fraction=1.0, population_range=(300, 600), unattributed_mean=0.5,
                            colocation_rate=0.0)
    data = synth.generate(cfg)
    x = synth.per_user_samples(data.ledger, data.catalog, data.category_map, data.panel)
    assert x.size >= 4900
    fit = stats.fit_distribution(x, "lognormal")
    assert fit.shape == pytest.approx(cfg.intensity_shape, rel=0.05)
    assert fit.scale == pytest.approx(cfg.urban_scale, rel=0.05)
