import filecmp
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from stutime import ingest, pipeline, synth
from stutime.cli import main
from stutime.records import format_stu_records, parse_stu_records

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
EXAMPLE = DATA / "example"
GOLDEN = dict(line.rstrip("\n").split("\t") for line in open(Path(__file__).parent / "golden" / "headers.tsv"))


def report(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, report(out), err


def tree(path):
    return sorted(p.relative_to(path) for p in Path(path).rglob("*") if p.is_file())


def first_line(path):
    with open(path, encoding="utf-8") as f:
        return f.readline().rstrip("\n")


@pytest.fixture(scope="module")
def example_output(tmp_path_factory):
    out = tmp_path_factory.mktemp("example-out")
    assert main(["compute", "-i", str(EXAMPLE), "-o", str(out)]) == 0
    return out


# -- compute ----------------------------------------------------------------------

def test_compute_layout(example_output):
    files = tree(example_output)
    for level in ("tract", "county_subdivision", "county", "metro"):
        assert Path(level, "2023-01-23.csv") in files
        assert Path(level, "2023-01-30.csv") in files
    assert Path("diagnostics.csv") in files and Path("panel_coverage.csv") in files


def test_golden_headers(example_output, tmp_path):
    for path in example_output.rglob("*.csv"):
        name = path.name if path.parent == example_output else "stu_records"
        assert first_line(path) == GOLDEN[name], path
    data = synth.generate(synth.SynthConfig(seed=0, n_tracts=4, n_counties=1, n_pois=10, n_weeks=1))
    for name, text in data.files().items():
        if name.endswith(".csv"):
            assert text.splitlines()[0] == GOLDEN[name], name
    for name in ("categories.csv", "crosswalk.csv", "hierarchy.csv", "panel.csv", "patterns.csv", "pois.csv"):
        assert first_line(EXAMPLE / name) == GOLDEN[name]


def test_output_round_trip(example_output):
    inputs = pipeline.load_inputs(EXAMPLE)
    result = pipeline.compute(inputs)
    for level in ("tract", "county_subdivision", "county", "metro"):
        for path in sorted((example_output / level).glob("*.csv")):
            text = path.read_text(encoding="utf-8")
            recs = parse_stu_records(text)
            assert format_stu_records(recs) == text
            assert all(r.timestamp.weekday() == 0 for r in recs)
        parsed = [r for p in sorted((example_output / level).glob("*.csv"))
                  for r in parse_stu_records(p.read_bytes())]
        assert parsed == result.records(level)


def test_tract_rows_have_no_gini(example_output):
    recs = parse_stu_records((example_output / "tract" / "2023-01-23.csv").read_text())
    assert recs and all(r.get("Gini") is None for r in recs)
    county = parse_stu_records((example_output / "county" / "2023-01-23.csv").read_text())
    assert all(r.get("Gini") is not None for r in county)


def test_workers_byte_identical(tmp_path):
    a, b = tmp_path / "w1", tmp_path / "w4"
    assert main(["compute", "-i", str(EXAMPLE), "-o", str(a), "--workers", "1"]) == 0
    assert main(["compute", "-i", str(EXAMPLE), "-o", str(b), "--workers", "4"]) == 0
    assert tree(a) == tree(b)
    for rel in tree(a):
        assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


def test_empty_patterns(tmp_path, capsys):
    inputs = tmp_path / "in"
    shutil.copytree(EXAMPLE, inputs)
    (inputs / "patterns.csv").write_text("poi_id,week_start,raw_visits,dwell_buckets,home_areas\n")
    code, rep, _ = run(capsys, "compute", "-i", inputs, "-o", tmp_path / "out")
    assert code == 0 and rep["files"] == "0"
    assert "NoPatterns" in (tmp_path / "out" / "diagnostics.csv").read_text()


def test_strict_failure_exit_code(tmp_path, capsys):
    inputs = tmp_path / "in"
    shutil.copytree(EXAMPLE, inputs)
    text, rows = synth.inject_corruption((inputs / "patterns.csv").read_text(), 1, seed=0)
    (inputs / "patterns.csv").write_text(text)
    code, _, err = run(capsys, "compute", "-i", inputs, "-o", tmp_path / "out", "--strict")
    assert code == 2
    assert "patterns.csv" in err and "MalformedBucketObject" in err
    code, _, _ = run(capsys, "compute", "-i", inputs, "-o", tmp_path / "lenient")
    assert code == 0
    assert f"patterns.csv:{rows[0]}" in (tmp_path / "lenient" / "diagnostics.csv").read_text()


def test_open_bucket_flag_beats_config(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[compute]\nopen_bucket_minutes = 300\nlevels = tract\n")
    run(capsys, "compute", "-i", EXAMPLE, "-o", tmp_path / "cfg", "--config", cfg)
    run(capsys, "compute", "-i", EXAMPLE, "-o", tmp_path / "flag", "--config", cfg, "--open-bucket-minutes", "240")
    run(capsys, "compute", "-i", EXAMPLE, "-o", tmp_path / "default", "--levels", "tract")
    assert not (tmp_path / "cfg" / "county").exists()
    week = Path("tract", "2023-01-23.csv")
    assert filecmp.cmp(tmp_path / "flag" / week, tmp_path / "default" / week, shallow=False)
    hi = parse_stu_records((tmp_path / "cfg" / week).read_text())
    lo = parse_stu_records((tmp_path / "default" / week).read_text())
    assert all(h.get("Per_User_STU_all") >= l.get("Per_User_STU_all") for h, l in zip(hi, lo))
    assert any(h.get("Per_User_STU_all") > l.get("Per_User_STU_all") for h, l in zip(hi, lo))


def test_panel_coverage_file(example_output):
    lines = (example_output / "panel_coverage.csv").read_text().splitlines()
    levels = {line.split(",")[0] for line in lines[1:]}
    assert levels == {"tract", "county", "state"}


# -- stats wrappers -----------------------------------------------------------------

def test_fit_selects_lognormal(tmp_path, capsys):
    cfg = synth.SynthConfig(seed=3, n_tracts=1500, n_counties=15, n_pois=140, n_weeks=1, urban_fraction=1.0,
                            population_range=(300, 600), unattributed_mean=0.5, colocation_rate=0.0)
    data = synth.generate(cfg)
    x = synth.per_user_samples(data.ledger, data.catalog, data.category_map, data.panel)
    path = tmp_path / "per_user.csv"
    path.write_text("value\n" + "\n".join(repr(float(v)) for v in x) + "\n")
    code, rep, err = run(capsys, "fit", "--values", path)
    assert code == 0
    assert rep["best"] == "lognormal" and rep["lognormal.rank"] == "1"
    assert int(rep["n"]) == x.size
    assert "lognormal" in err


def test_fit_reports_failures(tmp_path, capsys):
    path = tmp_path / "v.csv"
    path.write_text("value\n" + "\n".join(str(v) for v in np.linspace(-3, 3, 50)) + "\n")
    code, rep, _ = run(capsys, "fit", "--values", path, "--families", "normal,lognormal")
    assert code == 0 and rep["best"] == "normal" and "lognormal.error" in rep


def test_moran_checkerboard(capsys):
    code, rep, _ = run(capsys, "moran", "--values", DATA / "checkerboard_values.csv",
                       "--edges", DATA / "checkerboard_edges.csv", "--seed", 0, "--permutations", 99)
    assert code == 0
    assert abs(float(rep["I"]) + 1) <= 1e-12


def test_moran_gradient(capsys):
    code, rep, _ = run(capsys, "moran", "--values", DATA / "gradient_values.csv",
                       "--edges", DATA / "gradient_edges.csv", "--seed", 7)
    assert float(rep["I"]) > 0.5 and float(rep["p_value"]) < 0.01


def test_moran_requires_seed(capsys):
    with pytest.raises(SystemExit):
        main(["moran", "--values", str(DATA / "checkerboard_values.csv"),
              "--edges", str(DATA / "checkerboard_edges.csv")])


def test_correlate_affine(tmp_path, capsys):
    path = tmp_path / "xy.csv"
    path.write_text("x,y\n" + "".join(f"{i},{2 * i}\n" for i in range(12)))
    code, rep, _ = run(capsys, "correlate", path)
    assert code == 0 and float(rep["r"]) == 1.0 and float(rep["ci_high"]) == 1.0


def test_ks2(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("value\n" + "\n".join(map(str, rng.lognormal(math.log(268.7), 0.6, 2000))))
    b.write_text("value\n" + "\n".join(map(str, rng.lognormal(math.log(155.3), 0.6, 2000))))
    code, rep, _ = run(capsys, "ks2", a, b)
    assert code == 0 and float(rep["D"]) > 0.15 and float(rep["p_value"]) < 0.001


# -- aggregate ------------------------------------------------------------------------

def test_aggregate_crosswalk(tmp_path, capsys):
    vals, cw = tmp_path / "v.csv", tmp_path / "cw.csv"
    vals.write_text("geoid,value\nA,10\n")
    cw.write_text("source_geoid,target_geoid,weight\nA,X,0.4\nA,Y,0.6\n")
    code = main(["aggregate", "--values", str(vals), "--crosswalk", str(cw)])
    out = capsys.readouterr().out.splitlines()
    assert code == 0 and out[0] == GOLDEN["aggregate"]
    got = {g: float(v) for g, v in (line.split(",") for line in out[1:])}
    assert got["X"] == pytest.approx(4) and got["Y"] == pytest.approx(6)


def test_aggregate_hierarchy(tmp_path, capsys):
    hier = ingest.load_hierarchy((EXAMPLE / "hierarchy.csv").read_bytes())
    tracts = sorted(hier.tracts)[:2]
    vals = tmp_path / "v.csv"
    vals.write_text(f"geoid,value,devices\n{tracts[0]},100,10\n{tracts[1]},200,30\n")
    code = main(["aggregate", "--values", str(vals), "--hierarchy", str(EXAMPLE / "hierarchy.csv"),
                 "--level", "county", "--weight-column", "devices"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[1] == f"{hier.unit_of(tracts[0], 'county')},175.0"


# -- synth / validate -------------------------------------------------------------------

def test_synth_deterministic(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[synth]\nn_tracts = 6\nn_counties = 2\nn_pois = 30\nn_weeks = 1\n")
    run(capsys, "synth", "--config", cfg, "--seed", 5, "-o", tmp_path / "a")
    run(capsys, "synth", "--config", cfg, "--seed", 5, "-o", tmp_path / "b")
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    for rel in tree(tmp_path / "a"):
        assert filecmp.cmp(tmp_path / "a" / rel, tmp_path / "b" / rel, shallow=False)


def test_synth_requires_seed(tmp_path):
    with pytest.raises(SystemExit):
        main(["synth", "-o", str(tmp_path)])


def test_validate_small(tmp_path, capsys):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[synth]\nn_tracts = 10\nn_counties = 2\nn_pois = 60\nn_weeks = 2\ncolocation_rate = 0.2\n")
    code, rep, err = run(capsys, "validate", "--config", cfg, "--seed", 3, "--workdir", tmp_path / "w")
    assert code == 0 and rep["pass"] == "1"
    assert err.count("PASS") == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stutime.cli", "correlate", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "Pearson" in proc.stdout
