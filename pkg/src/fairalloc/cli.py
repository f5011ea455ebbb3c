"""Command-line benchmark runner.

Subcommands:
  run              Monte-Carlo sweep from a config file.
  lambda-search    grid search of the discount parameter.
  validate-bounds  empirical check of the worst-agent gap bound.
  ingest           normalize a sales CSV into per-agent daily totals.
  real-data        fit seasonal moments and evaluate policies on held-out data.

Exit codes: 0 success, 2 configuration/validation error, 3 resource limits,
1 for a failed bound check.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .core import InvalidInputError
from .demand import ConfigurationError
from .harness import (
    ExperimentConfig,
    IngestError,
    ingest_sales,
    lambda_search,
    real_data_experiment,
    run_experiment,
    validate_bounds,
)
from .mdp import ResourceError
from .policies import PolicyConfig
from .policies import ConfigurationError as PolicyConfigurationError

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_yaml(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    if getattr(args, "out", None) is not None:
        overrides["output"] = args.out
    if getattr(args, "format", None) is not None:
        overrides["format"] = args.format
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    return dataclasses.replace(config, **overrides) if overrides else config


def _cmd_run(args) -> int:
    config = _load_config(args)
    table = run_experiment(config)
    if config.output:
        table.write(config.output, config.format)
        print(f"wrote {len(table.raw_rows)} rows to {config.output}")
    else:
        sys.stdout.write(table.aggregate_csv())
    return EXIT_OK


def _cmd_lambda_search(args) -> int:
    config = _load_config(args)
    grid = [float(g) for g in args.grid.split(",")]
    result = lambda_search(config, grid, schedule=args.schedule)
    print(f"best lambda: {result.best_lambda:g} ({result.schedule})")
    for row in result.stats:
        print(
            f"  lambda={row['lambda']:g}: log_nsw={row['log_nsw_mean']:.6f}"
            f" +- {row['log_nsw_std']:.6f}, util={row['utilization_mean']:.2f}%"
        )
    return EXIT_OK


def _cmd_validate_bounds(args) -> int:
    config = _load_config(args)
    report = validate_bounds(config, xi=args.xi)
    print(
        f"regime={report.regime} bound={report.bound:.6g} episodes={report.episodes}"
        f" within={report.within_fraction:.3f} target>={1 - report.xi:.3f}"
        f" -> {'PASS' if report.passed else 'FAIL'}"
    )
    return EXIT_OK if report.passed else EXIT_FAILED_CHECK


def _cmd_ingest(args) -> int:
    history = ingest_sales(
        args.csv,
        agent_column=args.agent_col,
        value_column=args.value_col,
        date_column=args.date_col,
        date_format=args.date_format,
    )
    history.to_csv(args.out, index=False, date_format="%Y-%m-%d")
    print(f"wrote {len(history)} agent-day rows to {args.out}")
    return EXIT_OK


def _default_real_data_policies():
    import numpy as np

    return (
        PolicyConfig("saffe"),
        PolicyConfig("saffe_d", lambda_value=0.5, lambda_schedule="sqrt_decay"),
        PolicyConfig("hope_online"),
        PolicyConfig("guarded_hope", guardrail_lt=7 ** -0.5, label="guarded_hope[T^-1/2]"),
        PolicyConfig("guarded_hope", guardrail_lt=7 ** (-1.0 / 3.0), label="guarded_hope[T^-1/3]"),
    )


def _cmd_real_data(args) -> int:
    history = ingest_sales(
        args.csv,
        agent_column=args.agent_col,
        value_column=args.value_col,
        date_column=args.date_col,
        date_format=args.date_format,
    )
    table = real_data_experiment(
        history,
        split_date=args.split_date,
        period=args.period,
        budget_fraction=args.budget_fraction,
        policies=_default_real_data_policies(),
        keep_prob=args.keep_prob,
        seed=args.seed if args.seed is not None else 0,
    )
    if args.out:
        table.write(args.out, args.format or "csv")
        print(f"wrote {len(table.raw_rows)} rows to {args.out}")
    else:
        sys.stdout.write(table.aggregate_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairalloc", description="sequential fair-allocation benchmarks"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--episodes", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["csv", "structured"], default=None)
        p.add_argument("--threads", type=int, default=None)

    p_run = sub.add_parser("run", help="run a configured experiment sweep")
    p_run.add_argument("--config", required=True)
    add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_ls = sub.add_parser("lambda-search", help="grid-search the discount parameter")
    p_ls.add_argument("--config", required=True)
    p_ls.add_argument("--grid", required=True, help="comma-separated lambda values")
    p_ls.add_argument("--schedule", choices=["constant", "sqrt_decay"], default="sqrt_decay")
    add_common(p_ls)
    p_ls.set_defaults(func=_cmd_lambda_search)

    p_vb = sub.add_parser("validate-bounds", help="empirical gap-bound check")
    p_vb.add_argument("--config", required=True)
    p_vb.add_argument("--xi", type=float, default=None)
    add_common(p_vb)
    p_vb.set_defaults(func=_cmd_validate_bounds)

    def add_csv_args(p):
        p.add_argument("--csv", required=True)
        p.add_argument("--agent-col", default="agent")
        p.add_argument("--value-col", default="value")
        p.add_argument("--date-col", default="date")
        p.add_argument("--date-format", default=None)

    p_in = sub.add_parser("ingest", help="normalize a sales CSV")
    add_csv_args(p_in)
    p_in.add_argument("--out", required=True)
    p_in.set_defaults(func=_cmd_ingest)

    p_rd = sub.add_parser("real-data", help="fit and evaluate on real demand data")
    add_csv_args(p_rd)
    p_rd.add_argument("--split-date", required=True)
    p_rd.add_argument("--period", type=int, default=7)
    p_rd.add_argument("--budget-fraction", type=float, default=0.5)
    p_rd.add_argument("--keep-prob", type=float, default=1.0)
    p_rd.add_argument("--seed", type=int, default=None)
    p_rd.add_argument("--out", default=None)
    p_rd.add_argument("--format", choices=["csv", "structured"], default=None)
    p_rd.set_defaults(func=_cmd_real_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, PolicyConfigurationError, InvalidInputError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
