"""Online allocation policies.

Every policy maps (episode state, current demands, forecasts) to a step
allocation. The SAFFE family augments current demands with (possibly
std-discounted) expected future demands, water-fills against past
allocations, and pays out the current-demand share of the result. Guarded
HOPE instead precomputes per-unit guardrail rates from scaled expected
totals and branches on the remaining budget each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    AllocationMatrix,
    DemandMatrix,
    EpisodeState,
    Instance,
    InvalidInputError,
    advance,
)
from .demand import DemandModel, MomentTable, moments
from .waterfill import waterfill, waterfill_with_past

POLICY_KINDS = (
    "saffe",
    "saffe_d",
    "saffe_oracle",
    "hope_online",
    "guarded_hope",
    "greedy",
)

LAMBDA_SCHEDULES = ("constant", "sqrt_decay")


class ConfigurationError(ValueError):
    """Raised for unusable policy configurations."""


@dataclass(frozen=True)
class Forecast:
    """Moment forecasts for the steps strictly after the current one.

    ``per_step_mean`` and ``per_step_std`` have shape (steps_left, N);
    ``future_mean`` is the per-agent sum of the per-step means.
    """

    per_step_mean: np.ndarray
    per_step_std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.per_step_mean, dtype=float))
        std = np.atleast_2d(np.asarray(self.per_step_std, dtype=float))
        if mean.shape != std.shape:
            raise InvalidInputError("forecast mean and std must share shape")
        if np.any(mean < 0) or np.any(std < 0):
            raise InvalidInputError("forecast moments must be nonnegative")
        object.__setattr__(self, "per_step_mean", mean)
        object.__setattr__(self, "per_step_std", std)

    @property
    def future_mean(self) -> np.ndarray:
        return self.per_step_mean.sum(axis=0)

    @classmethod
    def empty(cls, num_agents: int) -> "Forecast":
        zeros = np.zeros((0, num_agents))
        return cls(zeros, zeros.copy())

    @classmethod
    def from_moments(cls, table: MomentTable) -> "Forecast":
        return cls(table.mean, table.std)


@dataclass(frozen=True)
class PolicyConfig:
    """Which policy to run and its hyper-parameters.

    ``lambda_schedule`` is either constant, lambda_t = lambda_value, or
    sqrt_decay, lambda_t = lambda_value * sqrt(T - t) with T - t the number
    of steps strictly after t (so the final step discounts nothing).
    """

    kind: str
    lambda_value: float = 0.0
    lambda_schedule: str = "constant"
    guardrail_lt: Optional[float] = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        if self.lambda_schedule not in LAMBDA_SCHEDULES:
            raise ConfigurationError(
                f"unknown lambda schedule {self.lambda_schedule!r}"
            )
        if self.lambda_value < 0:
            raise ConfigurationError("lambda must be nonnegative")
        if self.kind == "guarded_hope":
            if self.guardrail_lt is None or not (0.0 < self.guardrail_lt < 1.0):
                raise ConfigurationError("guarded_hope needs L_T in (0, 1)")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == "saffe_d":
            return f"saffe_d[{self.lambda_schedule}:{self.lambda_value:g}]"
        if self.kind == "guarded_hope":
            return f"guarded_hope[lt={self.guardrail_lt:g}]"
        return self.kind

    def lambda_at(self, step: int, horizon: int) -> float:
        """Discount multiplier at 1-based step ``step``."""
        if self.kind != "saffe_d":
            return 0.0
        if self.lambda_schedule == "sqrt_decay":
            return self.lambda_value * np.sqrt(max(0, horizon - step))
        return self.lambda_value

    @classmethod
    def from_dict(cls, raw: dict) -> "PolicyConfig":
        return cls(
            kind=raw["kind"],
            lambda_value=float(raw.get("lambda", raw.get("lambda_value", 0.0))),
            lambda_schedule=raw.get("lambda_schedule", "constant"),
            guardrail_lt=raw.get("guardrail_lt"),
            label=raw.get("label", ""),
        )


def _clamp_step(alloc: np.ndarray, demand: np.ndarray, budget: float) -> np.ndarray:
    """Pull a step allocation back into the feasible set (tolerance cleanup)."""
    alloc = np.minimum(np.clip(alloc, 0.0, None), demand)
    total = alloc.sum()
    if total > budget and total > 0:
        alloc = alloc * (budget / total)
    return alloc


def saffe_step(
    state: EpisodeState,
    demand,
    forecast: Forecast,
    weights,
    lambda_t: float = 0.0,
) -> np.ndarray:
    """One SAFFE(-D) step: water-fill current plus discounted future demand.

    Y_i = X_i + sum over future steps of (mean - lambda_t * std)^+; the
    water-filling total C_i is paid out in proportion X_i / Y_i, the rest
    stays reserved. Agents with Y_i = 0 receive nothing.
    """
    demand = np.asarray(demand, dtype=float)
    weights = np.asarray(weights, dtype=float)
    discounted = np.clip(
        forecast.per_step_mean - lambda_t * forecast.per_step_std, 0.0, None
    )
    y = demand + discounted.sum(axis=0)
    result = waterfill_with_past(
        y, weights, state.remaining_budget, past=state.cumulative_allocations
    )
    alloc = np.zeros_like(demand)
    positive = y > 0
    alloc[positive] = result.allocations[positive] * demand[positive] / y[positive]
    return _clamp_step(alloc, demand, state.remaining_budget)


def saffe_oracle_step(state: EpisodeState, demand, realized_future, weights) -> np.ndarray:
    """SAFFE step with the realized future demand sequence instead of moments."""
    realized_future = np.atleast_2d(np.asarray(realized_future, dtype=float))
    forecast = Forecast(realized_future, np.zeros_like(realized_future))
    return saffe_step(state, demand, forecast, weights, lambda_t=0.0)


def hope_online_step(state: EpisodeState, demand, forecast: Forecast, weights) -> np.ndarray:
    """HOPE-Online: identical to an undiscounted SAFFE step in this setting."""
    return saffe_step(state, demand, forecast, weights, lambda_t=0.0)


def greedy_step(state: EpisodeState, demand, weights) -> np.ndarray:
    """Water-fill current demands with the remaining budget; reserve nothing."""
    demand = np.asarray(demand, dtype=float)
    result = waterfill(demand, np.asarray(weights, dtype=float), state.remaining_budget)
    return _clamp_step(result.allocations, demand, state.remaining_budget)


def _full_moment_table(model, horizon: int, num_agents: int) -> MomentTable:
    if isinstance(model, MomentTable):
        table = model
    elif isinstance(model, DemandModel):
        table = moments(model, 0)
    else:
        raise InvalidInputError("model must be a DemandModel or MomentTable")
    if table.mean.shape != (horizon, num_agents):
        raise InvalidInputError("moment table shape does not match the instance")
    return table


def _guardrail_rates(instance: Instance, table: MomentTable, lt: float):
    """Per-unit-of-demand guardrail allocation rates (upper, lower).

    Rates come from water-filling the budget over expected totals scaled down
    by (1 - c) and up by (1 + gamma), then dividing by those scaled totals.
    Negative scaled totals (possible with tiny means) are clamped at 0, as
    are agents with no expected demand at all.
    """
    conf = np.sqrt(table.std[0] * table.mean[0] * (instance.horizon - 1))
    expected = table.mean.sum(axis=0)
    upper_rate = np.zeros(instance.num_agents)
    lower_rate = np.zeros(instance.num_agents)
    has_demand = expected > 0
    ratio = np.zeros(instance.num_agents)
    ratio[has_demand] = conf[has_demand] / expected[has_demand]
    c = lt * (1.0 + ratio) - ratio
    low_totals = np.clip(expected * (1.0 - c), 0.0, None)
    res = waterfill(low_totals, instance.weights, instance.budget)
    ok = low_totals > 0
    upper_rate[ok] = res.allocations[ok] / low_totals[ok]
    gamma = ratio
    high_totals = expected * (1.0 + gamma)
    res = waterfill(high_totals, instance.weights, instance.budget)
    ok = high_totals > 0
    lower_rate[ok] = res.allocations[ok] / high_totals[ok]
    return upper_rate, lower_rate


def guarded_hope_run(
    instance: Instance, demands: DemandMatrix, model, lt: float
) -> AllocationMatrix:
    """Guardrail policy over a full episode.

    Per step, three budget regimes: (i) too little even for the lower
    guardrail, split the budget equally among current demanders (capped at
    demand, residue redistributed); (ii) enough for the upper guardrail plus
    a confidence-padded reserve for lower-guardrail futures, pay the upper
    rate; otherwise pay the lower rate.
    """
    if not (0.0 < lt < 1.0):
        raise ConfigurationError("guardrail L_T must lie in (0, 1)")
    table = _full_moment_table(model, instance.horizon, instance.num_agents)
    upper_rate, lower_rate = _guardrail_rates(instance, table, lt)
    horizon = instance.horizon
    rows = np.zeros((horizon, instance.num_agents))
    state = EpisodeState.initial(instance)
    ones = np.ones(instance.num_agents)
    for t0 in range(horizon):
        x = demands.values[t0]
        budget = state.remaining_budget
        conf_t = np.sqrt(table.std[t0] * table.mean[t0] * (horizon - 1 - t0))
        future_incl = table.mean[t0:].sum(axis=0)
        if budget <= (x * lower_rate).sum():
            # Equal split among demanders with per-agent demand caps; the
            # cap-and-redistribute rule is exactly unit-weight water-filling.
            alloc = waterfill(x, ones, budget).allocations
        elif budget >= (x * upper_rate).sum() + (
            lower_rate * (future_incl + conf_t)
        ).sum():
            alloc = x * upper_rate
        else:
            alloc = x * lower_rate
        alloc = _clamp_step(alloc, x, budget)
        rows[t0] = alloc
        state = advance(state, alloc, x)
    return AllocationMatrix(rows, budget=instance.budget)


def step_allocation(
    config: PolicyConfig,
    instance: Instance,
    state: EpisodeState,
    step_demand: np.ndarray,
    table: MomentTable,
    realized_future: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Dispatch one step of any per-step policy (everything but guarded_hope)."""
    t0 = state.step - 1
    if config.kind == "greedy":
        return greedy_step(state, step_demand, instance.weights)
    if config.kind == "saffe_oracle":
        if realized_future is None:
            raise InvalidInputError("saffe_oracle needs the realized future demands")
        return saffe_oracle_step(state, step_demand, realized_future, instance.weights)
    forecast = Forecast(table.mean[t0 + 1 :], table.std[t0 + 1 :])
    lambda_t = config.lambda_at(state.step, instance.horizon)
    return saffe_step(state, step_demand, forecast, instance.weights, lambda_t)


def run_policy(
    instance: Instance,
    demands: DemandMatrix,
    model,
    config: PolicyConfig,
) -> AllocationMatrix:
    """Run a policy over a full episode and return its allocation matrix.

    ``model`` may be a DemandModel or a precomputed full-horizon MomentTable;
    the oracle ignores it and reads the realized future directly.
    """
    if config.kind == "guarded_hope":
        return guarded_hope_run(instance, demands, model, config.guardrail_lt)
    if model is None and config.kind in ("saffe_oracle", "greedy"):
        zeros = np.zeros((instance.horizon, instance.num_agents))
        table = MomentTable(zeros, zeros.copy())
    else:
        table = _full_moment_table(model, instance.horizon, instance.num_agents)
    rows = np.zeros((instance.horizon, instance.num_agents))
    state = EpisodeState.initial(instance)
    for t0 in range(instance.horizon):
        x = demands.values[t0]
        realized = demands.values[t0 + 1 :] if config.kind == "saffe_oracle" else None
        alloc = step_allocation(config, instance, state, x, table, realized)
        rows[t0] = alloc
        state = advance(state, alloc, x)
    return AllocationMatrix(rows, budget=instance.budget)
