"""Weighted water-filling solvers.

Solves max sum_i w_i * log(past_i + C_i) subject to 0 <= C_i <= demand_i and
sum_i C_i <= budget. The optimum has the form past_i + C_i = min(past_i +
demand_i, w_i * mu) clamped below at past_i, where the water level mu exhausts
the budget. The level is found exactly with a single sort over the 2N
breakpoints of the piecewise-linear spend curve, O(N log N) overall.

Agents with zero demand receive exactly 0 and never influence the level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FEASIBILITY_TOL, InvalidInputError


@dataclass(frozen=True)
class WaterfillResult:
    """Solution of one water-filling program.

    ``water_level`` is None when the budget covers every demand in full.
    ``binding_set`` holds the agents sitting exactly at the level, i.e. those
    not fully satisfied whose past + allocation equals w_i * mu.
    """

    allocations: np.ndarray
    water_level: Optional[float]
    binding_set: np.ndarray


def _validate(demands, weights, budget, past):
    demands = np.asarray(demands, dtype=float)
    weights = np.asarray(weights, dtype=float)
    past = np.zeros_like(demands) if past is None else np.asarray(past, dtype=float)
    if demands.shape != weights.shape or demands.shape != past.shape:
        raise InvalidInputError("demands, weights and past must have equal length")
    if not (
        np.all(np.isfinite(demands))
        and np.all(np.isfinite(weights))
        and np.all(np.isfinite(past))
        and np.isfinite(budget)
    ):
        raise InvalidInputError("inputs must be finite")
    if np.any(demands < 0):
        raise InvalidInputError("demands must be nonnegative")
    if np.any(past < 0):
        raise InvalidInputError("past allocations must be nonnegative")
    if np.any(weights <= 0):
        raise InvalidInputError("weights must be positive")
    if budget < 0:
        raise InvalidInputError("budget must be nonnegative")
    return demands, weights, float(budget), past


def waterfill_with_past(demands, weights, budget, past=None) -> WaterfillResult:
    """Water-fill ``budget`` over agents that already hold ``past`` units.

    With ``past`` all zero this reduces to the fresh-allocation solver.
    """
    demands, weights, budget, past = _validate(demands, weights, budget, past)
    n = demands.shape[0]
    allocations = np.zeros(n)
    active = demands > 0
    if not np.any(active):
        return WaterfillResult(allocations, None, np.empty(0, dtype=int))

    x = demands[active]
    w = weights[active]
    p = past[active]
    total = x.sum()
    if budget >= total:
        allocations[active] = x
        return WaterfillResult(allocations, None, np.empty(0, dtype=int))

    # Spend curve S(mu) = sum_i min(x_i, (w_i*mu - p_i)^+) is piecewise linear
    # and nondecreasing; its breakpoints are where agents enter (p_i/w_i) or
    # saturate ((p_i + x_i)/w_i).
    lo = p / w
    hi = (p + x) / w
    bps = np.unique(np.concatenate([lo, hi]))
    spend = np.minimum(x, np.clip(np.outer(bps, w) - p, 0.0, None)).sum(axis=1)
    k = int(np.searchsorted(spend, budget, side="left"))
    if k == 0:
        mu = float(bps[0])
    else:
        left = bps[k - 1]
        in_segment = (lo <= left) & (hi > left)
        slope = w[in_segment].sum()
        mu = float(left + (budget - spend[k - 1]) / slope)

    filled = np.minimum(x, np.clip(w * mu - p, 0.0, None))
    allocations[active] = filled
    # Agents whose past already exceeds the level get 0 and sit above it;
    # they are not counted as binding.
    binding = (filled < x - FEASIBILITY_TOL) & (p <= w * mu + FEASIBILITY_TOL)
    binding_set = np.flatnonzero(active)[binding]
    return WaterfillResult(allocations, mu, binding_set)


def waterfill(demands, weights, budget) -> WaterfillResult:
    """Water-fill ``budget`` over fresh demands (no past allocations)."""
    return waterfill_with_past(demands, weights, budget, past=None)
