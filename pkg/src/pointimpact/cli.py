"""Command-line front end: ``pointimpact <subcommand> ...``.

Every subcommand accepts ``--seed``, ``--out``, ``--format`` and
``--quiet``.  On failure a one-line JSON error record is written to stderr
and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapConfig, pairs_bootstrap, percentile_ci, residual_bootstrap
from .estimation import fit_point_impact, fit_two_sample
from .fbm import FbmSpec, Grid, sample_fbm_cholesky, sample_fbm_circulant
from .harness import (
    ExperimentConfig,
    default_quantile_table,
    emit_histogram_data,
    emit_report,
    ingest,
    run_coverage_experiment,
)
from .limit_dist import QuantileTable, quantile_table, wald_ci
from .scenarios import Dataset, cusp_effect, gen_two_sample


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser, fmt=("json", "csv"), default_fmt="json") -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=fmt, default=default_fmt)
    p.add_argument("--quiet", action="store_true")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset CSV (y column then one column per grid point)")
    p.add_argument("--trajectories", help="trajectory CSV (header t,<grid points>)")
    p.add_argument("--responses", help="response CSV, one y per subject")


def _load_data(args) -> Dataset:
    if args.data:
        return Dataset.from_csv(args.data)
    if args.trajectories and args.responses:
        return ingest(args.trajectories, args.responses)
    raise ValueError("give --data, or --trajectories with --responses")


def _write(args, text: str) -> None:
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _ci_text(args, ci) -> str:
    if args.format == "json":
        return json.dumps(ci.to_dict()) + "\n"
    return "lo,hi,level,method,width\n" + f"{ci.lo!r},{ci.hi!r},{ci.level!r},{ci.method},{ci.width!r}\n"


def cmd_simulate_fbm(args) -> None:
    grid = Grid.linspace(args.t0, args.t1, args.grid_size)
    sampler = sample_fbm_cholesky if args.method == "cholesky" else sample_fbm_circulant
    ts = sampler(FbmSpec(args.hurst, grid), args.n, args.seed)
    if args.out == "-":
        raise ValueError("simulate-fbm needs --out PATH")
    ts.to_csv(args.out) if args.format == "csv" else ts.to_json(args.out)


def cmd_fit(args) -> None:
    fit = fit_point_impact(_load_data(args))
    _write(args, fit.to_json() + "\n" if args.format == "json" else fit.csv_summary())


def _boot(args, kind: str) -> None:
    data = _load_data(args)
    cfg = BootstrapConfig(args.replicates, kind, args.seed, args.level)
    if kind == "Residual":
        dist = residual_bootstrap(data, fit_point_impact(data), cfg)
    else:
        dist = pairs_bootstrap(data, cfg)
    if args.dist_out:
        dist.to_csv(args.dist_out)
    if args.hist_out:
        emit_histogram_data(dist.theta_star, args.bins, args.hist_out)
    _write(args, _ci_text(args, percentile_ci(dist, args.level, form=args.form)))


def cmd_ci_wald(args) -> None:
    data = _load_data(args)
    fit = fit_point_impact(data)
    table = QuantileTable.from_csv(args.table) if args.table else default_quantile_table()
    _write(args, _ci_text(args, wald_ci(fit, args.hurst, data.n, args.level, table, data.grid.span)))


def cmd_quantile_table(args) -> None:
    table = quantile_table(_floats(args.hurst), _floats(args.alpha), args.family, args.draws,
                           args.seed, args.T, args.resolution, args.workers)
    if args.format == "csv":
        if args.out == "-":
            raise ValueError("csv output needs --out PATH")
        table.to_csv(args.out)
    else:
        rows = [{"regime": f, "H": h, "alpha": a} | v for (f, h, a), v in sorted(table.entries.items())]
        _write(args, json.dumps(rows, indent=2) + "\n")


def cmd_coverage(args) -> None:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {k: getattr(args, k) for k in ("n", "sigma", "H", "outer_reps", "boot_B", "methods",
                                               "scenario", "f", "level") if getattr(args, k) is not None}
    if args.seed_set:
        overrides["seed"] = args.seed
    cfg = ExperimentConfig(**(cfg.to_dict() | overrides))
    table = QuantileTable.from_csv(args.table) if args.table else None
    progress = None
    if not args.quiet:
        progress = lambda i, n: print(f"\rreplicate {i}/{n}", end="" if i < n else "\n", file=sys.stderr)  # noqa: E731
    rows = run_coverage_experiment(cfg, table, args.workers, progress)
    if args.out == "-":
        for r in rows:
            print(json.dumps(r.record()))
    else:
        emit_report(rows, args.format, args.out)
        Path(str(args.out) + ".config").write_text(cfg.dumps())


def cmd_two_sample(args) -> None:
    grid = Grid.linspace(0.0, 1.0, args.grid_size)
    S = args.hurst if args.smoothness is None else args.smoothness
    effect = cusp_effect(args.theta0, args.c, S)
    data = gen_two_sample(effect, np.zeros_like, args.n1, args.n2, args.hurst, grid, args.seed, S)
    fit = fit_two_sample(data)
    rec = fit.to_dict() | {"theta0": data.theta0, "degenerate": data.degenerate}
    if args.format == "json":
        _write(args, json.dumps(rec) + "\n")
    else:
        _write(args, "theta_hat,theta_index,theta0\n" + f"{fit.theta_hat!r},{fit.theta_index},{data.theta0!r}\n")


def cmd_ingest(args) -> None:
    data = ingest(args.trajectories, args.responses, args.theta0, args.sigma, seed=args.seed)
    if args.out == "-":
        raise ValueError("ingest needs --out PATH")
    data.to_csv(args.out)
    Path(str(args.out) + ".truth.json").write_text(data.truth_json() + "\n")
    if not args.quiet:
        print(f"{data.n} subjects x {len(data.grid)} grid points -> {args.out}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pointimpact", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-fbm", help="sample fBm trajectories on a uniform grid")
    _common(p, default_fmt="csv")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--grid-size", type=int, default=101)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--method", choices=("cholesky", "circulant"), default="cholesky")
    p.set_defaults(func=cmd_simulate_fbm)

    p = sub.add_parser("fit", help="least-squares point impact fit")
    _common(p)
    _data_args(p)
    p.set_defaults(func=cmd_fit)

    for name, kind in (("ci-residual", "Residual"), ("ci-pairs", "Pairs")):
        p = sub.add_parser(name, help=f"{kind.lower()} bootstrap interval for theta")
        _common(p)
        _data_args(p)
        p.add_argument("--replicates", "-B", type=int, default=1000)
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--form", choices=("percentile", "basic"), default="percentile")
        p.add_argument("--dist-out", help="write the bootstrap distribution CSV here")
        p.add_argument("--hist-out", help="write histogram data of theta* here")
        p.add_argument("--bins", type=int, default=50)
        p.set_defaults(func=lambda a, k=kind: _boot(a, k))

    p = sub.add_parser("ci-wald", help="Wald-type interval with known Hurst exponent")
    _common(p)
    _data_args(p)
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--table", help="quantile table CSV (default: shipped table)")
    p.set_defaults(func=cmd_ci_wald)

    p = sub.add_parser("quantile-table", help="simulate limit-law quantiles")
    _common(p)
    p.add_argument("--hurst", default="0.5", help="comma-separated H values")
    p.add_argument("--alpha", default="0.005,0.01,0.025,0.05,0.1")
    p.add_argument("--family", choices=("CorrectSpec", "CompleteMisspec"), default="CorrectSpec")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--resolution", type=float, default=2.0**-7)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_quantile_table)

    p = sub.add_parser("coverage-experiment", help="Monte Carlo coverage study")
    _common(p, default_fmt="csv")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--n", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--H", type=float)
    p.add_argument("--outer-reps", dest="outer_reps", type=int)
    p.add_argument("--boot-B", dest="boot_B", type=int)
    p.add_argument("--methods")
    p.add_argument("--scenario")
    p.add_argument("--f")
    p.add_argument("--level", type=float)
    p.add_argument("--table")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("two-sample", help="two-sample argmax estimator on simulated groups")
    _common(p)
    p.add_argument("--n1", type=int, default=100)
    p.add_argument("--n2", type=int, default=100)
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--theta0", type=float, default=0.5)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--smoothness", type=float, help="cusp smoothness of the effect (default: hurst)")
    p.add_argument("--grid-size", type=int, default=101)
    p.set_defaults(func=cmd_two_sample)

    p = sub.add_parser("ingest", help="read external trajectories, optionally synthesize responses")
    _common(p, default_fmt="csv")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--responses")
    p.add_argument("--theta0", type=float)
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    args = parser.parse_args(argv)
    args.seed_set = "--seed" in argv
    try:
        args.func(args)
    except Exception as exc:  # reported as a machine-readable record
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
