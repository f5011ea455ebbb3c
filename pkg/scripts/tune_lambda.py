#!/usr/bin/env python3
"""Grid-search the discount weight of the std-discounted policy for both
schedules (constant and square-root decay) on a chosen setting."""

import argparse

from fairalloc import PolicyConfig
from fairalloc.harness import ExperimentConfig, lambda_search


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--setting", default="symmetric")
    parser.add_argument("--agents", type=int, default=50)
    parser.add_argument("--horizon", type=int, default=40)
    parser.add_argument("--arrivals", type=float, default=2.0)
    parser.add_argument("--budget-fraction", type=float, default=0.5)
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--sqrt-grid", default="0.005,0.01,0.02,0.03,0.05",
        help="grid for the decaying schedule",
    )
    parser.add_argument(
        "--const-grid", default="0.03,0.06,0.12,0.18,0.3",
        help="grid for the constant schedule",
    )
    args = parser.parse_args()

    config = ExperimentConfig(
        setting=args.setting,
        num_agents=args.agents,
        horizon=args.horizon,
        expected_arrivals=args.arrivals,
        budget_fraction=args.budget_fraction,
        policies=(PolicyConfig("saffe"),),
        episodes=args.episodes,
        master_seed=args.seed,
    )
    for schedule, raw in (
        ("sqrt_decay", args.sqrt_grid),
        ("constant", args.const_grid),
    ):
        grid = [float(g) for g in raw.split(",")]
        result = lambda_search(config, grid, schedule=schedule)
        print(f"\n{schedule}: best lambda {result.best_lambda:g}")
        for row in result.stats:
            print(
                f"  lambda {row['lambda']:<7g} log-NSW {row['log_nsw_mean']:9.3f}"
                f" +- {row['log_nsw_std']:7.3f}  util {row['utilization_mean']:6.2f}%"
            )


if __name__ == "__main__":
    main()
