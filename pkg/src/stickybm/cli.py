"""Command line interface.

Every verb writes CSV with a header row to ``--out`` (default stdout).
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed check or invalid input path.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig
from .errors import ArgumentError, ConfigError, DomainError, ModelError, NumericError, ValidationError
from .estimate import EstimatorMethod
from .experiments import (
    CheckRow,
    ConvergenceRow,
    KsRow,
    _apply,
    rows_to_csv,
    run_convergence_suite,
    run_kernel_checks,
    run_mc,
    run_portenko_check,
    run_reflection_test,
    run_sampler_crosscheck,
    summaries_csv,
)
from .path_model import read_path_csv, require_valid, write_path_csv
from .simulate import sample_path
from .statistics import stats_table, terminal_counts

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VALIDATION = 4


def _common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides mc.master_seed)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stickybm", description="Sticky Brownian motion simulation and inference.")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("simulate", help="simulate one path and write it as t,x,hit CSV")
    p.add_argument("--replica", type=int, default=0)
    _common(p)
    p = sub.add_parser("stats", help="running counts of a path CSV")
    p.add_argument("path")
    _common(p)
    p = sub.add_parser("estimate", help="stickiness estimates from a path CSV")
    p.add_argument("path")
    _common(p)
    for verb, text in (
        ("mc", "Monte Carlo study of the configured estimators"),
        ("converge", "convergence suite over grid.n_values"),
        ("kernel-check", "kernel invariant report"),
        ("reflect-test", "reflection-at-first-hit distribution test"),
        ("sampler-check", "kernel-exact vs time-change distribution test"),
        ("portenko-check", "limit law of the strict-crossing count vs simulation"),
    ):
        _common(sub.add_parser(verb, help=text))
    return parser


def _load_config(args) -> RunConfig:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["mc.master_seed"] = args.seed
    if args.config:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig(overrides)


def _emit(text: str, config: RunConfig, out):
    dest = out or config["output.path"]
    if dest:
        Path(dest).write_text(text)
    else:
        sys.stdout.write(text)


def _estimate_rows(path, config):
    counts = terminal_counts(path)
    rows = []
    for spec in config.estimators():
        res = _apply(spec, path, counts)
        method = res.method.value
        if res.method is not EstimatorMethod.OCCUPATION_RATIO:
            method = f"{method}:{spec.variant}"
        else:
            method = f"{method}:alpha={spec.alpha:g}"
        rows.append((method, res.value, res.hit_event, path.n, path.num_intervals / path.n,
                     res.diagnostics["N1"], res.diagnostics["N2"]))
    return rows


def _run(args) -> int:
    config = _load_config(args)
    verb = args.verb
    status = EXIT_OK
    if verb == "simulate":
        text = write_path_csv(sample_path(config.sim_config(), args.replica))
    elif verb == "stats":
        text = stats_table(require_valid(read_path_csv(args.path)))
    elif verb == "estimate":
        path = require_valid(read_path_csv(args.path))
        text = rows_to_csv(("method", "value", "hit", "n", "T", "N1", "N2"), _estimate_rows(path, config))
    elif verb == "mc":
        summaries = run_mc(config)
        text = summaries_csv(summaries)
        print(f"wall seconds: {summaries[0].wall_seconds:.3f}", file=sys.stderr)
    elif verb == "converge":
        text = rows_to_csv(ConvergenceRow.HEADER, [r.csv_row() for r in run_convergence_suite(config)])
    else:
        runners = {
            "kernel-check": (run_kernel_checks, CheckRow),
            "reflect-test": (run_reflection_test, KsRow),
            "sampler-check": (run_sampler_crosscheck, KsRow),
            "portenko-check": (run_portenko_check, CheckRow),
        }
        fn, row_type = runners[verb]
        rows = fn(config)
        text = rows_to_csv(row_type.HEADER, [r.csv_row() for r in rows])
        if not all(r.passed for r in rows):
            status = EXIT_VALIDATION
    _emit(text, config, args.out)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ArgumentError, DomainError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
