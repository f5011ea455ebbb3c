"""Offline baseline: optimal totals with full demand knowledge.

The offline program maximizes sum_i w_i * log(total_i) subject to the budget
and to each agent's total demand, which water-filling solves in closed form.
Any per-step split of the optimal totals that respects the per-step demand
caps is offline-optimal; we realize the totals earliest-first, which only
matters for trace output since the fairness metrics depend on totals alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AllocationMatrix, DemandMatrix, Instance
from .waterfill import waterfill


@dataclass(frozen=True)
class HindsightSolution:
    """Optimal offline totals, one feasible per-step realization, and log-NSW."""

    totals: np.ndarray
    per_step: AllocationMatrix
    log_nsw: float


def log_nsw_of_totals(totals, demand_totals, weights, epsilon: float) -> float:
    """Weighted sum of log(total + epsilon) over agents with any demand."""
    totals = np.asarray(totals, dtype=float)
    demand_totals = np.asarray(demand_totals, dtype=float)
    weights = np.asarray(weights, dtype=float)
    active = demand_totals > 0
    return float((weights[active] * np.log(totals[active] + epsilon)).sum())


def realize_earliest_first(demands: DemandMatrix, totals) -> AllocationMatrix:
    """Spread per-agent totals over steps, saturating earliest demands first."""
    totals = np.asarray(totals, dtype=float)
    remaining = totals.copy()
    out = np.zeros_like(demands.values)
    for t in range(demands.horizon):
        take = np.minimum(demands.values[t], remaining)
        out[t] = take
        remaining = remaining - take
    return AllocationMatrix(out)


def solve_hindsight(instance: Instance, demands: DemandMatrix) -> HindsightSolution:
    """Optimal totals via water-filling on total demands, plus a realization."""
    demand_totals = demands.totals()
    result = waterfill(demand_totals, instance.weights, instance.budget)
    totals = result.allocations
    per_step = realize_earliest_first(demands, totals)
    value = log_nsw_of_totals(
        totals, demand_totals, instance.weights, instance.epsilon
    )
    return HindsightSolution(totals=totals, per_step=per_step, log_nsw=value)
