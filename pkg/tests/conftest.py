import datetime as dt

import pytest

from stutime import synth
from stutime.ingest import BUCKET_LABELS, WeeklyPattern

MONDAY = dt.date(2023, 1, 2)


def pattern(poi_id="p1", week=MONDAY, raw=10, buckets=None, homes=None):
    counts = dict.fromkeys(BUCKET_LABELS, 0)
    counts.update(buckets or {})
    return WeeklyPattern(poi_id, week, raw, tuple(counts[b] for b in BUCKET_LABELS), dict(homes or {}))


@pytest.fixture(scope="session")
def small_synth():
    cfg = synth.SynthConfig(seed=5, n_tracts=12, n_counties=3, n_pois=70, n_weeks=2,
                            colocation_rate=0.15)
    return synth.generate(cfg)


@pytest.fixture(scope="session")
def acceptance_synth():
    return synth.generate(synth.SynthConfig(seed=2023))


@pytest.fixture(scope="session")
def small_synth_dir(small_synth, tmp_path_factory):
    return small_synth.write(tmp_path_factory.mktemp("synth-small"))


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
