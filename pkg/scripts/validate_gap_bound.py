#!/usr/bin/env python3
"""Empirically check the closed-form worst-agent gap bound: run the
std-discounted policy with the Chebyshev schedule lambda(t) = sqrt((T-t)/xi)
and report the fraction of episodes whose unnormalized worst-agent gap to the
offline optimum stays under the bound (target: at least 1 - xi)."""

import argparse
import sys

from fairalloc import PolicyConfig
from fairalloc.harness import ExperimentConfig, validate_bounds


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--setting", default="symmetric_equal")
    parser.add_argument("--agents", type=int, default=20)
    parser.add_argument("--horizon", type=int, default=20)
    parser.add_argument("--arrivals", type=float, default=2.0)
    parser.add_argument("--budget-fraction", type=float, default=0.5)
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--xi", type=float, default=0.1)
    args = parser.parse_args()

    config = ExperimentConfig(
        setting=args.setting,
        num_agents=args.agents,
        horizon=args.horizon,
        expected_arrivals=args.arrivals,
        budget_fraction=args.budget_fraction,
        policies=(PolicyConfig("saffe"),),  # replaced by validate_bounds
        episodes=args.episodes,
        master_seed=args.seed,
    )
    report = validate_bounds(config, xi=args.xi)
    print(
        f"regime {report.regime}, bound {report.bound:.4g}, "
        f"{report.episodes} episodes, within-bound fraction "
        f"{report.within_fraction:.3f} (target >= {1 - report.xi:.3f}): "
        f"{'PASS' if report.passed else 'FAIL'}"
    )
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
