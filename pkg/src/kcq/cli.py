"""Command-line front end.

Exit codes: 0 success, 2 configuration or validation error, 3 compute
error, 4 degenerate likelihood.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import svgplot
from .config import parse_overrides, read_config, write_config_text
from .dynamics import QoISpec
from .errors import (
    ConfigError,
    ConvergenceError,
    CorruptionError,
    DegenerateLikelihoodError,
    KcqError,
    SampleFailureError,
    SchemaMigrationError,
)
from .estimators import nonconditional_stats, weighted_kde, quotient_weights
from .measurement import MeasurementModel, MeasurementSet
from .oracle import McConfig, mc_sample_database
from .pipeline import (
    beam_config,
    generate_database,
    load_database,
    offline_generate,
    online_quantify,
    sdof_config,
    synthetic_measurements,
)

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_DEGENERATE = 0, 2, 3, 4
EXAMPLES = ("sdof", "beam")
SCALES = ("desk", "paper")

TIMESERIES_COLUMNS = ["step", "time", "kcq_mean", "kcq_sd", "nmc_mean", "nmc_sd", "ess", "bandwidth"]


def _g(x):
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# CSV writers and readers


def timeseries_csv(kcq_results, nmc_results, times):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMESERIES_COLUMNS)
    for r, nr in zip(kcq_results, nmc_results):
        w.writerow([r.step, _g(times[r.step]), _g(r.mean), _g(r.sd), _g(nr.mean), _g(nr.sd),
                    _g(r.ess), _g(r.bandwidth)])
    return buf.getvalue()


def read_timeseries_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and list(rows[0].keys()) != TIMESERIES_COLUMNS:
        raise CorruptionError(f"unexpected timeseries columns {list(rows[0].keys())}")
    return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rows]


def pdf_csv(grid, density, nonconditional):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "density", "nonconditional_density"])
    for row in zip(grid, density, nonconditional):
        w.writerow([_g(v) for v in row])
    return buf.getvalue()


def read_pdf_csv(text):
    cols = svgplot.read_csv_columns(text)
    return np.array(cols["grid"]), np.array(cols["density"]), np.array(cols["nonconditional_density"])


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# shared online stage


def _parse_steps(text, horizon):
    if text is None:
        return None
    if text.strip() == "all":
        return list(range(1, horizon + 1))
    try:
        steps = [int(s) for s in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError("steps", f"cannot parse {text!r}") from exc
    bad = [s for s in steps if not 1 <= s <= horizon]
    if bad:
        raise ConfigError("steps", f"steps {bad} lie outside the horizon 1..{horizon}")
    return steps


def quantify_outputs(db, meas, qoi, steps, N_k, out_dir, pdf_steps=None, ess_min=5.0,
                     plots=True, prefix=""):
    """Run the online stage and write the timeseries, density CSVs, and plots."""
    os.makedirs(out_dir, exist_ok=True)
    kcq = online_quantify(db, meas, qoi, steps, N_k, ess_min=ess_min)
    nmc = [nonconditional_stats(db, qoi, k) for k in steps]
    ts_text = timeseries_csv(kcq, nmc, db.times)
    _write(os.path.join(out_dir, f"{prefix}kcq_timeseries.csv"), ts_text)
    if plots:
        _write(os.path.join(out_dir, f"{prefix}kcq_band.svg"),
               svgplot.band_plot(ts_text, f"{qoi.label}: mean +- 3 sd"))
    pdf_steps = steps if pdf_steps is None else pdf_steps
    by_step = {r.step: r for r in kcq}
    for k in pdf_steps:
        r = by_step[k]
        nmc_pdf = weighted_kde(r.pdf_grid, db.qoi(qoi)[:, k], quotient_weights(db).W,
                               nmc[steps.index(k)].bandwidth)
        text = pdf_csv(r.pdf_grid, r.pdf_values, nmc_pdf)
        _write(os.path.join(out_dir, f"{prefix}kcq_pdf_{k}.csv"), text)
        if plots:
            _write(os.path.join(out_dir, f"{prefix}kcq_pdf_{k}.svg"),
                   svgplot.pdf_plot(text, f"{qoi.label} at t = {db.times[k]:.4g} s"))
    return kcq, nmc


# ---------------------------------------------------------------------------
# subcommands


def _load_config(args):
    return read_config(args.config, parse_overrides(args.set))


def cmd_offline(args):
    config, extras = _load_config(args)
    out = args.out or extras.get("dir") or "kcq_out"
    start = time.perf_counter()
    db = offline_generate(config, out)
    report = {
        "samples": db.n, "failed": len(db.provenance.get("failed", [])),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "database": os.path.join(out, "database"),
    }
    _write(os.path.join(out, "run_report.json"), json.dumps(report, indent=1) + "\n")
    print(f"database with {db.n} samples written to {report['database']}")
    return EXIT_OK


def cmd_simulate(args):
    config, extras = _load_config(args)
    truth = args.truth or extras.get("truth", "nominal")
    alpha = _truth_alpha(config, truth)
    meas, _ = synthetic_measurements(config, alpha=alpha)
    meas.write_csv(args.out)
    print(f"{meas.values.shape[0]} measurement rows written to {args.out}")
    return EXIT_OK


def _truth_alpha(config, truth):
    from .pipeline import build_system, truth_alpha
    if truth == "nominal":
        return np.zeros(build_system(config).space.dim)
    if truth == "prior":
        return truth_alpha(config)
    raise ConfigError("truth", f"must be 'nominal' or 'prior', got {truth!r}")


def _measurement_model(config, db):
    model = config.measurement_model()
    if tuple(model.points) != db.sensor_specs:
        raise ConfigError("measurement.sensors", "config sensors do not match the database")
    return model


def cmd_quantify(args):
    config, extras = _load_config(args)
    db = load_database(args.db)
    model = _measurement_model(config, db)
    meas = MeasurementSet.read_csv(args.measurements, model)
    qoi = QoISpec.from_label(args.qoi)
    steps = _parse_steps(args.steps, db.n_steps) or list(config.steps)
    pdf_steps = _parse_steps(args.pdf_steps, db.n_steps) or [s for s in config.steps if s in steps]
    N_k = args.nk or config.N_k
    out = args.out or extras.get("dir") or "kcq_out"
    quantify_outputs(db, meas, qoi, steps, N_k, out, pdf_steps, config.ess_min, plots=not args.no_plots)
    print(f"results for {qoi.label} at {len(steps)} steps written to {out}")
    return EXIT_OK


def cmd_mc_reference(args):
    config, extras = _load_config(args)
    model = config.measurement_model()
    meas = MeasurementSet.read_csv(args.measurements, model)
    db = mc_sample_database(config, McConfig(args.n_mc, args.seed))
    qoi = QoISpec.from_label(args.qoi)
    steps = _parse_steps(args.steps, db.n_steps) or list(config.steps)
    out = args.out or "kcq_reference"
    quantify_outputs(db, meas, qoi, steps, args.nk or config.N_k, out, pdf_steps=[],
                     ess_min=config.ess_min, plots=False)
    print(f"reference with {db.n} pseudo-random samples written to {out}")
    return EXIT_OK


def compare_rows(kcq_rows, ref_rows):
    ref = {r["step"]: r for r in ref_rows}
    out = []
    for r in kcq_rows:
        if r["step"] not in ref:
            continue
        q = ref[r["step"]]
        out.append({
            "step": r["step"], "time": r["time"],
            "kcq_mean": r["kcq_mean"], "ref_mean": q["kcq_mean"],
            "re_mean": abs(r["kcq_mean"] - q["kcq_mean"]) / abs(q["kcq_mean"]) if q["kcq_mean"] else math.inf,
            "kcq_sd": r["kcq_sd"], "ref_sd": q["kcq_sd"],
            "re_sd": abs(r["kcq_sd"] - q["kcq_sd"]) / q["kcq_sd"] if q["kcq_sd"] else math.inf,
            "nmc_sd": r["nmc_sd"],
        })
    return out


def format_table(label, rows):
    lines = [f"{label}",
             f"{'time':>8} {'KCQ mean':>11} {'ref mean':>11} {'RE':>7}   "
             f"{'KCQ sd':>9} {'ref sd':>9} {'RE':>7}   {'N-MC sd':>9}"]
    for r in rows:
        lines.append(f"{r['time']:8.4g} {r['kcq_mean']:11.4f} {r['ref_mean']:11.4f} {r['re_mean']:7.2%}   "
                     f"{r['kcq_sd']:9.4f} {r['ref_sd']:9.4f} {r['re_sd']:7.2%}   {r['nmc_sd']:9.4f}")
    return "\n".join(lines)


def compare_csv(rows):
    buf = io.StringIO()
    cols = ["step", "time", "kcq_mean", "ref_mean", "re_mean", "kcq_sd", "ref_sd", "re_sd", "nmc_sd"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["step"]] + [_g(r[c]) for c in cols[1:]])
    return buf.getvalue()


def cmd_compare(args):
    with open(args.kcq) as fh:
        kcq_rows = read_timeseries_csv(fh.read())
    with open(args.reference) as fh:
        ref_rows = read_timeseries_csv(fh.read())
    rows = compare_rows(kcq_rows, ref_rows)
    print(format_table(os.path.basename(args.kcq), rows))
    if args.out:
        _write(args.out, compare_csv(rows))
    return EXIT_OK


def cmd_plot(args):
    with open(args.csv) as fh:
        text = fh.read()
    header = text.split("\n", 1)[0]
    if header.startswith("step,"):
        svg = svgplot.band_plot(text, args.title or "mean +- 3 sd")
    else:
        svg = svgplot.pdf_plot(text, args.title or "density")
    _write(args.out, svg)
    return EXIT_OK


EXAMPLE_SETTINGS = {
    ("sdof", "desk"): dict(config=lambda: sdof_config(), n_mc=100_000),
    ("sdof", "paper"): dict(config=lambda: sdof_config(), n_mc=1_000_000),
    ("beam", "desk"): dict(config=lambda: beam_config(), n_mc=10_000),
    ("beam", "paper"): dict(config=lambda: beam_config(n_elements=10, n=600, n_steps=400,
                                                       steps=(100, 200, 300, 400)), n_mc=100_000),
}


def reference_bytes(config, n_mc):
    """Memory held by an in-memory reference database (channels, samples, weights)."""
    channels = len(config.qois) + len(config.sensors)
    return 8 * n_mc * (channels * (config.n_steps + 1) + 64)


def _physical_memory():
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return None


def run_example(name, scale, out, n_mc=None, mc_seed=12345, plots=True, log=print):
    """Truth run, synthetic data, offline and online stages, and the MC comparison."""
    settings = EXAMPLE_SETTINGS[(name, scale)]
    config = settings["config"]()
    n_mc = settings["n_mc"] if n_mc is None else n_mc
    need, have = reference_bytes(config, n_mc), _physical_memory()
    if have is not None and need > 0.6 * have:
        raise ConfigError("n_mc", f"a {n_mc}-sample reference needs about {need / 2**30:.1f} GiB "
                                  f"of {have / 2**30:.1f} GiB; lower it with --n-mc")
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "config.cfg"), write_config_text(config))
    meas, _ = synthetic_measurements(config, alpha=np.zeros(config_dim(config)))
    meas.write_csv(os.path.join(out, "measurements.csv"))
    log(f"[{name}/{scale}] offline: {config.n} samples, {config.n_steps} steps")
    db = generate_database(config)
    log(f"[{name}/{scale}] reference: {n_mc} pseudo-random samples")
    ref = mc_sample_database(config, McConfig(n_mc, mc_seed))
    tables = {}
    for qoi in config.qois:
        prefix = f"{qoi.label}_"
        kcq, _ = quantify_outputs(db, meas, qoi, list(config.steps), config.N_k, out,
                                  ess_min=config.ess_min, plots=plots, prefix=prefix)
        ref_dir = os.path.join(out, "reference")
        quantify_outputs(ref, meas, qoi, list(config.steps), config.N_k, ref_dir, pdf_steps=[],
                         ess_min=config.ess_min, plots=False, prefix=prefix)
        with open(os.path.join(out, f"{prefix}kcq_timeseries.csv")) as fh:
            k_rows = read_timeseries_csv(fh.read())
        with open(os.path.join(ref_dir, f"{prefix}kcq_timeseries.csv")) as fh:
            r_rows = read_timeseries_csv(fh.read())
        rows = compare_rows(k_rows, r_rows)
        _write(os.path.join(out, f"{prefix}compare.csv"), compare_csv(rows))
        tables[qoi.label] = rows
        log(format_table(f"{qoi.label} (N_k = {config.N_k}, n = {db.n} vs {ref.n} reference)", rows))
    return tables


def config_dim(config):
    from .pipeline import build_system
    return build_system(config).space.dim


def cmd_example(args):
    if args.name not in EXAMPLES:
        raise ConfigError("example", f"unknown example {args.name!r}; valid names: {', '.join(EXAMPLES)}")
    run_example(args.name, args.scale, args.out or f"example_{args.name}_{args.scale}",
                n_mc=args.n_mc, plots=not args.no_plots)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    p = argparse.ArgumentParser(prog="kcq", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a configuration entry (repeatable)")

    sp = sub.add_parser("offline", help="generate and store the response database")
    with_config(sp)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_offline)

    sp = sub.add_parser("simulate", help="write synthetic measurements from a truth run")
    with_config(sp)
    sp.add_argument("--truth", choices=["nominal", "prior"],
                    help="nominal parameters or a draw from the prior (measurement.truth_seed)")
    sp.add_argument("--out", required=True, help="measurement CSV path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("quantify", help="conditional statistics from a stored database")
    with_config(sp)
    sp.add_argument("--db", required=True)
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--qoi", required=True, help="QoI label, e.g. u_dof0 or uw_x3")
    sp.add_argument("--nk", type=int, help="number of key conditions (default online.N_k)")
    sp.add_argument("--steps", help="comma-separated steps or 'all' (default online.steps)")
    sp.add_argument("--pdf-steps", help="steps that get density files (default online.steps)")
    sp.add_argument("--out")
    sp.add_argument("--no-plots", action="store_true")
    sp.set_defaults(func=cmd_quantify)

    sp = sub.add_parser("mc-reference", help="pseudo-random conditional reference")
    with_config(sp)
    sp.add_argument("--measurements", required=True)
    sp.add_argument("--qoi", required=True)
    sp.add_argument("--n-mc", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=12345)
    sp.add_argument("--nk", type=int)
    sp.add_argument("--steps")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_mc_reference)

    sp = sub.add_parser("compare", help="relative errors between two timeseries CSVs")
    sp.add_argument("--kcq", required=True)
    sp.add_argument("--reference", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("plot", help="regenerate an SVG plot from a timeseries or density CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--title", help="plot title (the quantify stage uses the QoI label)")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("example", help="run a built-in example end to end")
    sp.add_argument("name", help=f"one of: {', '.join(EXAMPLES)}")
    sp.add_argument("--scale", choices=SCALES, default="desk")
    sp.add_argument("--n-mc", type=int, help="override the reference sample count")
    sp.add_argument("--out")
    sp.add_argument("--no-plots", action="store_true")
    sp.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DegenerateLikelihoodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConvergenceError, SampleFailureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ConfigError, CorruptionError, SchemaMigrationError, KcqError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
