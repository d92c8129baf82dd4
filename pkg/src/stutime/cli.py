"""Command-line entry point: ``stu <subcommand> ...``.

Reports are printed to stdout as ``key=value`` lines; a human-readable
summary goes to stderr. Settings from ``--config`` (INI sections
``[compute]`` / ``[synth]``) are overridden by explicit flags.
"""

import argparse
import configparser
import csv
import io
import logging
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import aggregate, ingest, pipeline, stats, synth
from .aggregate import LEVELS, Level
from .errors import StuError
from .measures import DwellPolicy
from .records import parse_stu_records

log = logging.getLogger("stutime")


def _read_config(path, section):
    if not path:
        return {}
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    return dict(parser[section]) if parser.has_section(section) else {}


def _report(pairs, summary=()):
    out = sys.stdout
    for key, value in pairs:
        if isinstance(value, float):
            value = repr(float(value))
        out.write(f"{key}={'' if value is None else value}\n")
    for line in summary:
        sys.stderr.write(line + "\n")


def _read_table(path):
    with open(path, newline="", encoding="utf-8-sig") as f:
        reader = csv.DictReader(f)
        return reader.fieldnames or [], list(reader)


def _column(path, column=None):
    fields, rows = _read_table(path)
    if column is None:
        if "value" in fields:
            column = "value"
        elif len(fields) == 1:
            column = fields[0]
        else:
            raise SystemExit(f"{path}: pick a column with --column (have {fields})")
    if column not in fields:
        raise SystemExit(f"{path}: no column {column!r}")
    return np.array([float(r[column]) for r in rows if r[column] != ""])


def _keyed_values(path, key="geoid", column="value"):
    fields, rows = _read_table(path)
    if key not in fields or column not in fields:
        raise SystemExit(f"{path}: need columns {key!r} and {column!r}")
    return {r[key].strip(): float(r[column]) for r in rows if r[column] != ""}


# -- subcommands -------------------------------------------------------------


def _policy(args, cfg):
    if args.dwell_policy:
        return DwellPolicy.parse(args.dwell_policy)
    if args.open_bucket_minutes is not None:
        return DwellPolicy.with_open_bucket(args.open_bucket_minutes)
    if cfg.get("dwell_policy"):
        return DwellPolicy.parse(cfg["dwell_policy"])
    if cfg.get("open_bucket_minutes"):
        return DwellPolicy.with_open_bucket(float(cfg["open_bucket_minutes"]))
    return DwellPolicy()


def cmd_compute(args):
    cfg = _read_config(args.config, "compute")
    strict = args.strict if args.strict is not None else cfg.get("strict", "false").lower() == "true"
    levels = args.levels or cfg.get("levels") or ",".join(lv.value for lv in LEVELS)
    levels = [Level(x.strip()) for x in levels.split(",") if x.strip()]
    workers = args.workers or int(cfg.get("workers", 1))
    inputs_dir = args.input or cfg.get("input")
    output_dir = args.output or cfg.get("output")
    if not inputs_dir or not output_dir:
        raise SystemExit("compute needs --input and --output")
    policy = _policy(args, cfg)

    start = time.perf_counter()
    diagnostics = pipeline.Diagnostics()
    inputs = pipeline.load_inputs(inputs_dir, strict=strict, diagnostics=diagnostics)
    result = pipeline.compute(inputs, policy=policy, strict=strict, levels=levels, workers=workers)
    diagnostics.extend(result.diagnostics)
    result.diagnostics = diagnostics
    written = pipeline.write_outputs(result, output_dir)
    elapsed = time.perf_counter() - start
    _report(
        [("files", len(written)), ("weeks", len({p.week_start for p in inputs.patterns})),
         ("patterns", len(inputs.patterns)), ("diagnostics", len(diagnostics))],
        [f"wrote {len(written)} tables to {output_dir} in {elapsed:.2f}s "
         f"({len(diagnostics)} diagnostics)"],
    )
    return 0


def cmd_aggregate(args):
    values = _keyed_values(args.values, args.key_column, args.value_column)
    diagnostics = pipeline.Diagnostics()
    if args.crosswalk:
        with open(args.crosswalk, "rb") as f:
            weights = ingest.load_crosswalk(f)
        out = aggregate.apply_crosswalk(values, weights, strict=args.strict, diagnostics=diagnostics)
    else:
        if not args.hierarchy or not args.level:
            raise SystemExit("aggregate needs --crosswalk, or --hierarchy and --level")
        with open(args.hierarchy, "rb") as f:
            hierarchy = ingest.load_hierarchy(f)
        weights = _keyed_values(args.values, args.key_column, args.weight_column) \
            if args.weight_column else {k: 1.0 for k in values}
        acc = {}
        for tract, v in values.items():
            unit = hierarchy.unit_of(tract, args.level)
            if unit is None:
                diagnostics.emit("TractNotInHierarchy", tract, args.level)
                continue
            acc.setdefault(unit, aggregate.WeightedMean()).add(v, weights.get(tract, 0.0))
        out = {u: m.value for u, m in sorted(acc.items())}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("geoid", "value"))
    for geoid, v in out.items():
        writer.writerow((geoid, "" if v is None else repr(v)))
    if args.output:
        Path(args.output).write_text(buf.getvalue(), encoding="utf-8", newline="")
    else:
        sys.stdout.write(buf.getvalue())
    for e in diagnostics:
        sys.stderr.write(f"{e.kind} {e.key} {e.detail}\n")
    return 0


def cmd_fit(args):
    x = _column(args.values, args.column)
    families = [f.strip() for f in args.families.split(",")] if args.families else list(stats.FAMILIES)
    fits, failures = stats.select_best_family(x, families)
    pairs = [("n", x.size), ("best", fits[0].family if fits else None)]
    summary = [f"{'rank':>4} {'family':<12} {'KS D':>8} {'p':>10} {'shape':>10} {'loc':>10} {'scale':>10}"]
    for rank, f in enumerate(fits, start=1):
        pairs += [
            (f"{f.family}.rank", rank), (f"{f.family}.ks", f.ks_statistic),
            (f"{f.family}.p", f.p_value), (f"{f.family}.shape", f.shape),
            (f"{f.family}.loc", f.loc), (f"{f.family}.scale", f.scale),
        ]
        shape = "-" if f.shape is None else f"{f.shape:.4g}"
        summary.append(f"{rank:>4} {f.family:<12} {f.ks_statistic:8.4f} {f.p_value:10.3g} "
                       f"{shape:>10} {f.loc:10.4g} {f.scale:10.4g}")
    for fail in failures:
        pairs.append((f"{fail.family}.error", fail.reason))
        summary.append(f"   - {fail.family:<12} not fitted: {fail.reason}")
    _report(pairs, summary)
    return 0


def cmd_moran(args):
    values = _keyed_values(args.values, "geoid", args.column)
    with open(args.edges, encoding="utf-8-sig") as f:
        weights = stats.SpatialWeights.from_edge_csv(f.read(), ids=sorted(values))
    i, p = stats.morans_i(values, weights, permutations=args.permutations, seed=args.seed)
    _report(
        [("n", len(values)), ("I", i), ("p_value", p), ("permutations", args.permutations),
         ("seed", args.seed)],
        [f"Moran's I = {i:.6f} (permutation p = {p}, {args.permutations} permutations)"],
    )
    return 0


def cmd_ks2(args):
    a = _column(args.a, args.column)
    b = _column(args.b, args.column)
    d, p = stats.two_sample_ks(a, b)
    _report([("n_a", a.size), ("n_b", b.size), ("D", d), ("p_value", p)],
            [f"two-sample KS D = {d:.4f}, p = {p:.3g}"])
    return 0


def cmd_correlate(args):
    fields, rows = _read_table(args.values)
    xcol = args.x or fields[0]
    ycol = args.y or fields[1]
    x = np.array([float(r[xcol]) for r in rows])
    y = np.array([float(r[ycol]) for r in rows])
    r, p, (lo, hi) = stats.pearson_r(x, y)
    _report([("n", x.size), ("r", r), ("p_value", p), ("ci_low", lo), ("ci_high", hi)],
            [f"Pearson r = {r:.4f}, p = {p:.3g}, 95% CI [{lo:.4f}, {hi:.4f}]"])
    return 0


def cmd_synth(args):
    cfg = _read_config(args.config, "synth")
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    config = synth.SynthConfig.from_mapping(cfg)
    data = synth.generate(config)
    data.write(args.output)
    _report([("output", args.output), ("visits", len(data.ledger)), ("patterns", len(data.patterns)),
             ("corrupted_rows", ",".join(map(str, data.corrupted_rows)))],
            [f"wrote synthetic fixture (seed {config.seed}) to {args.output}"])
    return 0


def compare_to_oracle(output_dir, data, policy=None, rel_tol=1e-9):
    """Compare compute output tables with the ledger oracle.

    Returns ``{level: (n_values, worst_relative_error, n_missing)}``.
    """
    oracle = synth.oracle_measures(data.ledger, data.catalog, data.category_map, data.panel,
                                   data.hierarchy, policy)
    summary = {}
    for level in LEVELS:
        got = {}
        folder = Path(output_dir) / level.value
        for path in sorted(folder.glob("*.csv")) if folder.exists() else []:
            for rec in parse_stu_records(path.read_text(encoding="utf-8")):
                got[(rec.geoid, rec.timestamp.isoformat())] = rec.values
        expected = oracle[level]
        n, worst, missing = 0, 0.0, 0
        for key in set(got) | set(expected):
            g, e = got.get(key, {}), expected.get(key, {})
            missing += len(set(g) ^ set(e))
            for col in set(g) & set(e):
                n += 1
                scale = abs(e[col])
                err = abs(g[col] - e[col]) / scale if scale > 0 else abs(g[col])
                worst = max(worst, err)
        summary[level] = (n, worst, missing)
    return summary


def cmd_validate(args):
    cfg = _read_config(args.config, "synth")
    cfg["seed"] = str(args.seed)
    config = synth.SynthConfig.from_mapping(cfg)
    policy = DwellPolicy.with_open_bucket(args.open_bucket_minutes) \
        if args.open_bucket_minutes is not None else DwellPolicy()
    data = synth.generate(config, policy)
    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="stu-validate-"))
    data.write(workdir / "inputs")
    inputs = pipeline.load_inputs(workdir / "inputs", strict=True)
    result = pipeline.compute(inputs, policy=policy, strict=True, workers=args.workers)
    pipeline.write_outputs(result, workdir / "outputs")
    summary = compare_to_oracle(workdir / "outputs", data, policy)
    ok = True
    pairs, lines = [], []
    for level, (n, worst, missing) in summary.items():
        passed = missing == 0 and worst <= 1e-9 and n > 0
        ok &= passed
        pairs += [(f"{level}.values", n), (f"{level}.max_rel_error", worst),
                  (f"{level}.missing", missing), (f"{level}.pass", int(passed))]
        lines.append(f"{'PASS' if passed else 'FAIL'} {level.value:<20} {n:6d} values, "
                     f"max rel error {worst:.2e}, {missing} missing")
    pairs.append(("pass", int(ok)))
    _report(pairs, lines)
    return 0 if ok else 1


# -- parser ------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="stu", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="input directory -> per-level weekly tables", description="input directory -> per-level weekly tables")
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o")
    p.add_argument("--config")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=None)
    mode.add_argument("--lenient", dest="strict", action="store_false")
    p.add_argument("--open-bucket-minutes", type=float)
    p.add_argument("--dwell-policy", help="7 comma-separated representative minutes")
    p.add_argument("--levels", help="comma list of tract,county_subdivision,county,metro")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("aggregate", help="weighted roll-up or crosswalk of a geoid,value table", description="weighted roll-up or crosswalk of a geoid,value table")
    p.add_argument("--values", required=True)
    p.add_argument("--key-column", default="geoid")
    p.add_argument("--value-column", default="value")
    p.add_argument("--weight-column")
    p.add_argument("--hierarchy")
    p.add_argument("--level", choices=[lv.value for lv in aggregate.UPPER_LEVELS])
    p.add_argument("--crosswalk")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--output")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("fit", help="rank candidate distributions by KS statistic", description="rank candidate distributions by KS statistic")
    p.add_argument("--values", required=True)
    p.add_argument("--column")
    p.add_argument("--families", help=f"comma list from {','.join(stats.FAMILIES)}")
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; fitting is deterministic")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("moran", help="global Moran's I with permutation inference", description="global Moran's I with permutation inference")
    p.add_argument("--values", required=True)
    p.add_argument("--column", default="value")
    p.add_argument("--edges", required=True)
    p.add_argument("--permutations", type=int, default=stats.DEFAULT_PERMUTATIONS)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_moran)

    p = sub.add_parser("ks2", help="two-sample Kolmogorov-Smirnov test", description="two-sample Kolmogorov-Smirnov test")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--column")
    p.set_defaults(func=cmd_ks2)

    p = sub.add_parser("correlate", help="Pearson r with 95%% CI for a two-column file", description="Pearson r with 95% CI for a two-column file")
    p.add_argument("values")
    p.add_argument("--x")
    p.add_argument("--y")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("synth", help="write a synthetic input fixture", description="write a synthetic input fixture")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="synth -> compute -> compare with the visit-level oracle", description="synth -> compute -> compare with the visit-level oracle")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--open-bucket-minutes", type=float)
    p.add_argument("--workdir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StuError as err:
        sys.stderr.write(f"error: {type(err).__name__}: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
