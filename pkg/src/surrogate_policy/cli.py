"""Command-line frontend.

Subcommands ``fit-policy``, ``ucb``, ``welfare``, ``test-benchmark``,
``simulate`` and ``report``. Exit codes: 0 success, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import simulation as sim
from .dataio import RunConfig, band_csv, dumps, load_config, public, run_pipeline
from .errors import ConfigError, SurrogatePolicyError
from .pipeline import FitSettings

_SECTIONS = {
    "fit-policy": ("model",),
    "ucb": ("band",),
    "welfare": ("value", "benchmarks"),
    "test-benchmark": ("benchmarks",),
    "report": ("model", "band", "value", "benchmarks"),
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="input CSV with a header row")
    p.add_argument("--config", help="sectioned key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   help="recorded in the report; computation is single-threaded")
    p.add_argument("--out", help="output JSON path (default: stdout)")


def _fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=["welfare", "max-score", "utility"])
    p.add_argument("--loss", choices=["logistic", "exponential", "squared"])
    p.add_argument("--k", type=int, help="basis functions per covariate")
    p.add_argument("--folds", dest="m", type=int, help="cross-fitting folds")
    p.add_argument("--nuisance-k", type=int)
    p.add_argument("--y-col", dest="y_col")
    p.add_argument("--a-col", dest="a_col")
    p.add_argument("--x-cols", dest="x_cols", type=lambda s: s.split(","))
    p.add_argument("--alpha", type=float)
    p.add_argument("--B", type=int, dest="B")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surrogate-policy",
        description="Surrogate-loss policy learning with uniform inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-policy", help="fit the cross-fitted sieve policy")
    _common(p)
    _fit_options(p)

    p = sub.add_parser("ucb", help="uniform confidence band for the policy")
    _common(p)
    _fit_options(p)
    p.add_argument("--side", choices=["two", "two_sided", "lower", "upper"])
    p.add_argument("--grid", help='e.g. "0.05:0.95:201,0.5556"')
    p.add_argument("--null", choices=["all_leq_zero", "all_geq_zero"])
    p.add_argument("--csv", help="also write the band as tidy CSV")

    for name, text in (("welfare", "optimal value with bootstrap CI"),
                       ("test-benchmark", "compare the value to benchmark policies")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _fit_options(p)
        p.add_argument("--benchmark", action="append",
                       help="everyone | none | random:p=0.5 (repeatable)")

    p = sub.add_parser("report", help="full pipeline in one JSON report")
    _common(p)
    _fit_options(p)
    p.add_argument("--side", choices=["two", "two_sided", "lower", "upper"])
    p.add_argument("--grid")
    p.add_argument("--null", choices=["all_leq_zero", "all_geq_zero"])
    p.add_argument("--benchmark", action="append")
    p.add_argument("--csv", help="band curves as tidy CSV")
    p.add_argument("--rerun", help="re-run the configuration embedded in a report")

    p = sub.add_parser("simulate", help="Monte Carlo experiments on the simulation design")
    p.add_argument("--experiment", required=True,
                   choices=["size", "rejection", "normality", "variance", "closeness"])
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p.add_argument("--n", type=int)
    p.add_argument("--S", type=int, dest="S")
    p.add_argument("--B", type=int, dest="B")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--loss", choices=["logistic", "exponential", "squared"],
                   default="logistic")
    p.add_argument("--panel", choices=["I", "II"], default="I")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output JSON; a CSV table is written next to it")
    return parser


_FLAG_FIELDS = ("problem", "loss", "k", "m", "nuisance_k", "y_col", "a_col", "x_cols",
                "alpha", "B", "seed", "threads", "data", "out", "side", "grid", "null")


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    values = {}
    if getattr(args, "rerun", None):
        try:
            values.update(json.loads(Path(args.rerun).read_text())["config"])
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read embedded config from {args.rerun}: {exc}") from exc
        # the embedded config is reproduced verbatim; --out only picks the destination
        return RunConfig.from_dict(values).validate()
    if args.config:
        values.update(load_config(args.config))
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "benchmark", None):
        values["benchmarks"] = args.benchmark
    return RunConfig.from_dict(values).validate()


def _emit(obj, out) -> None:
    text = dumps(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _pipeline_command(args) -> int:
    config = resolve_config(args)
    if args.command == "test-benchmark" and not config.benchmarks:
        raise ConfigError("test-benchmark needs at least one --benchmark")
    report = run_pipeline(config, sections=_SECTIONS[args.command])
    band = report.get("_band_object")
    if band is not None and getattr(args, "csv", None):
        band_csv(band, args.csv)
    report = public(report)
    if args.command == "ucb":
        band_part = report["band"]
        out = {"schema": report["schema"], "config": report["config"], **band_part}
    elif args.command == "welfare":
        out = {"schema": report["schema"], "config": report["config"],
               **report["value"], "benchmarks": report["benchmarks"]}
    elif args.command == "test-benchmark":
        out = {"schema": report["schema"], "config": report["config"],
               "benchmarks": report["benchmarks"]}
    else:
        out = report
    _emit(out, args.out or config.out)
    return 0


def _table_csv(rows: list, path) -> None:
    keys = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def _simulate(args) -> int:
    scale = sim.SCALES[args.scale]
    S = args.S or scale["S"]
    B = args.B or scale["B"]
    if S < 1 or B < 100:
        raise ConfigError("need S >= 1 and B >= 100")
    settings = FitSettings(loss=args.loss, k=args.k)
    meta = {"experiment": args.experiment, "scale": args.scale, "S": S, "B": B,
            "k": args.k, "loss": args.loss, "alpha": args.alpha, "seed": args.seed,
            "threads": args.threads,
            "education_probs": sim.default_education_probs().tolist()}
    if args.experiment == "size":
        n = args.n or 250
        res = sim.run_size_experiment(n=n, S=S, B=B, panel=args.panel, alpha=args.alpha,
                                      seed=args.seed, settings=settings, k=args.k,
                                      loss=args.loss)
        rows = [{"n": n, "loss": args.loss, "k": args.k, "panel": args.panel,
                 "non_rejection": res.frequency}]
        out = {**meta, "n": n, "panel": args.panel, "table": rows}
    else:
        n = args.n or {"variance": 1000, "closeness": 2000}.get(args.experiment, 500)
        if args.experiment == "normality" and S < 200:
            raise ConfigError("the normality diagnostic needs S >= 200")
        welfare = sim.run_welfare_experiment(n=n, S=S, B=B, alpha=args.alpha,
                                             seed=args.seed, settings=settings)
        out = {**meta, "n": n, "gamma": list(sim.WELFARE_GAMMA), "v0": welfare["v0"]}
        if args.experiment == "rejection":
            table = sim.rejection_table(welfare)
            rows = [{"benchmark": b, "test": t, "rejection": f}
                    for b, row in table.items() for t, f in row.items()]
        elif args.experiment == "normality":
            diag = sim.normality_diagnostic(welfare)
            rows = [{"rule": r, "ks": diag[r]["ks"], "p_value": diag[r]["p_value"]}
                    for r in sim.RULES]
            out["standardized"] = {r: diag[r]["standardized"] for r in sim.RULES}
            out["estimated_vs_oracle_ks"] = diag["estimated_vs_oracle_ks"]
        elif args.experiment == "variance":
            rows = [sim.variance_consistency(welfare)]
        else:
            rows = [sim.plugin_closeness(welfare)]
        out["table"] = rows
    _emit(out, args.out)
    if args.out:
        _table_csv(out["table"], Path(args.out).with_suffix(".csv"))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        return _pipeline_command(args)
    except SurrogatePolicyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
