"""Fairness and efficiency metrics, plus concentration-bound diagnostics.

Per-agent fairness is the normalized deviation of cumulative online
allocations from the offline-optimal totals; utilization measures how much
of the effectively required budget (min of budget and total demand) was
distributed. The closed-form gap bounds and the Chebyshev demand bands are
reported in unnormalized allocation units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import AllocationMatrix, DemandMatrix, Instance, InvalidInputError
from .demand import DemandModel, MomentTable, compound_moments
from .hindsight import HindsightSolution, log_nsw_of_totals


@dataclass(frozen=True)
class MetricsReport:
    """Metrics of one policy run against the offline baseline.

    ``delta_log_nsw`` is (hindsight - policy) log-NSW normalized by the
    magnitude of the hindsight value (the raw difference is recoverable from
    ``log_nsw`` and ``hindsight_log_nsw``). ``per_agent_delta`` is normalized
    per agent by the hindsight total; ``per_agent_delta_raw`` keeps the
    unnormalized gaps used by the bound diagnostics.
    """

    log_nsw: float
    hindsight_log_nsw: float
    delta_log_nsw: float
    utilization_pct: float
    delta_a_mean: float
    delta_a_max: float
    per_agent_delta: np.ndarray
    per_agent_delta_raw: np.ndarray

    FIELD_ORDER = (
        "log_nsw",
        "hindsight_log_nsw",
        "delta_log_nsw",
        "utilization_pct",
        "delta_a_mean",
        "delta_a_max",
        "delta_a_max_raw",
    )

    @property
    def delta_a_max_raw(self) -> float:
        return float(self.per_agent_delta_raw.max()) if self.per_agent_delta_raw.size else 0.0

    def as_row(self) -> dict:
        return {name: float(getattr(self, name)) for name in self.FIELD_ORDER}


def compute_metrics(
    instance: Instance,
    demands: DemandMatrix,
    policy_alloc: AllocationMatrix,
    hindsight: HindsightSolution,
) -> MetricsReport:
    """Compare one policy allocation matrix against the hindsight solution."""
    if policy_alloc.values.shape != demands.values.shape:
        raise InvalidInputError("allocation and demand matrices must share dimensions")
    policy_totals = policy_alloc.totals()
    hind_totals = hindsight.totals
    raw = np.abs(hind_totals - policy_totals)
    normalized = np.zeros_like(raw)
    positive = hind_totals > 0
    normalized[positive] = raw[positive] / hind_totals[positive]
    if np.any(~positive & (demands.totals() > 0)):
        warnings.warn(
            "agent with positive demand received zero hindsight total; "
            "its normalized deviation is reported as 0"
        )
    required = min(instance.budget, float(demands.values.sum()))
    if required > 0:
        utilization = 100.0 * float(policy_alloc.values.sum()) / required
    else:
        utilization = 100.0
    value = log_nsw_of_totals(
        policy_totals, demands.totals(), instance.weights, instance.epsilon
    )
    hind_value = hindsight.log_nsw
    scale = abs(hind_value)
    delta = (hind_value - value) / scale if scale > 0 else hind_value - value
    return MetricsReport(
        log_nsw=value,
        hindsight_log_nsw=hind_value,
        delta_log_nsw=delta,
        utilization_pct=utilization,
        delta_a_mean=float(normalized.mean()),
        delta_a_max=float(normalized.max()),
        per_agent_delta=normalized,
        per_agent_delta_raw=raw,
    )


def theorem_bound(
    instance: Instance, model: DemandModel, xi: float, regime: str
) -> float:
    """Closed-form bound on the worst-agent gap to hindsight (raw units).

    balanced (equal per-step stds): 2 * T^{3/2} / sqrt(xi) * std;
    unbalanced: N * T^{3/2} / sqrt(xi) * std. The balanced regime expects a
    common std and falls back to the maximum with a warning when stds differ.
    """
    if not (0.0 < xi < 1.0):
        raise InvalidInputError("xi must lie in (0, 1)")
    if regime not in ("balanced", "unbalanced"):
        raise InvalidInputError(f"unknown regime {regime!r}")
    _, std = compound_moments(
        model.arrival_prob, model.demand_mean, model.demand_std
    )
    if regime == "balanced":
        if std.size and std.max() - std.min() > 1e-9 * max(1.0, std.max()):
            warnings.warn("balanced regime with unequal stds; using the maximum")
        factor = 2.0
    else:
        factor = float(instance.num_agents)
    common_std = float(std.max()) if std.size else 0.0
    horizon = instance.horizon
    return factor * horizon**1.5 / np.sqrt(xi) * common_std


def guardrail_bands(
    table: MomentTable, current_demand, t: int, xi: float
):
    """Chebyshev bands on each agent's remaining total demand.

    ``table`` must hold the moments of the steps strictly after t. The band
    half-width is sqrt(sum of future variances) / sqrt(xi), which equals
    sqrt((T - t) / xi) * std when per-step stds are constant. The lower band
    is clamped at the current demand (future demands are nonnegative).
    """
    if not (0.0 < xi < 1.0):
        raise InvalidInputError("xi must lie in (0, 1)")
    current = np.asarray(current_demand, dtype=float)
    expected_future = table.mean.sum(axis=0)
    half_width = np.sqrt((table.std**2).sum(axis=0)) / np.sqrt(xi)
    center = current + expected_future
    lower = np.maximum(current, center - half_width)
    upper = center + half_width
    return lower, upper
