"""Shared domain types and episode bookkeeping.

All quantities are double-precision floats. Budget comparisons use an
absolute tolerance of ``FEASIBILITY_TOL``; allocations are clamped back
into the feasible set after each step rather than rejected for sub-tolerance
overshoot. Value objects are immutable after construction and safe to share
across parallel episode workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEASIBILITY_TOL = 1e-9

#: Default guard added inside logarithms so zero utilities stay finite.
DEFAULT_EPSILON = 1e-6


class InvalidInputError(ValueError):
    """Raised when inputs violate a documented precondition."""


class FeasibilityError(ValueError):
    """Raised when an allocation would exceed the remaining budget."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Instance:
    """Problem instance: N agents, T steps, budget B, agent weights, log guard."""

    num_agents: int
    horizon: int
    budget: float
    weights: np.ndarray = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.num_agents < 1:
            raise InvalidInputError("num_agents must be >= 1")
        if self.horizon < 1:
            raise InvalidInputError("horizon must be >= 1")
        if self.budget < 0:
            raise InvalidInputError("budget must be >= 0")
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be > 0")
        weights = self.weights
        if weights is None:
            weights = np.ones(self.num_agents)
        weights = _as_float_array(weights, "weights")
        if weights.shape != (self.num_agents,):
            raise InvalidInputError("weights must have one entry per agent")
        if np.any(weights <= 0):
            raise InvalidInputError("weights must be positive")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "budget", float(self.budget))


@dataclass(frozen=True)
class DemandMatrix:
    """Realized demands, shape (T, N); entry (t, i) is agent i's demand at step t."""

    values: np.ndarray
    require_activity: bool = field(default=False, compare=False)

    def __post_init__(self):
        values = _as_float_array(self.values, "demands")
        if values.ndim != 2:
            raise InvalidInputError("demands must be a T x N matrix")
        if np.any(values < 0):
            raise InvalidInputError("demands must be nonnegative")
        if self.require_activity and np.any(values.sum(axis=0) <= 0):
            idle = np.flatnonzero(values.sum(axis=0) <= 0)
            raise InvalidInputError(
                f"agents {idle.tolist()} have no demand over the horizon"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def num_agents(self) -> int:
        return self.values.shape[1]

    def totals(self) -> np.ndarray:
        """Per-agent total demand over the horizon."""
        return self.values.sum(axis=0)


@dataclass(frozen=True)
class AllocationMatrix:
    """Per-step allocations, shape (T, N), budget-feasible by construction."""

    values: np.ndarray
    budget: float = None

    def __post_init__(self):
        values = _as_float_array(self.values, "allocations")
        if values.ndim != 2:
            raise InvalidInputError("allocations must be a T x N matrix")
        if np.any(values < -FEASIBILITY_TOL):
            raise InvalidInputError("allocations must be nonnegative")
        values = np.clip(values, 0.0, None)
        if self.budget is not None and values.sum() > self.budget + FEASIBILITY_TOL:
            raise FeasibilityError(
                f"total allocation {values.sum():.12g} exceeds budget {self.budget:.12g}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def num_agents(self) -> int:
        return self.values.shape[1]

    def totals(self) -> np.ndarray:
        """Per-agent cumulative allocation over the horizon."""
        return self.values.sum(axis=0)


@dataclass(frozen=True)
class EpisodeState:
    """Bookkeeping for a running episode: step index, budget left, cumulatives.

    ``step`` is 1-based: the state with ``step == t`` is the one a policy sees
    when deciding the allocation for step t. ``advance`` returns a new state;
    states are never mutated in place.
    """

    step: int
    remaining_budget: float
    cumulative_allocations: np.ndarray
    cumulative_demands: np.ndarray

    def __post_init__(self):
        alloc = _as_float_array(self.cumulative_allocations, "cumulative_allocations")
        dem = _as_float_array(self.cumulative_demands, "cumulative_demands")
        if self.remaining_budget < -FEASIBILITY_TOL:
            raise FeasibilityError("remaining budget is negative")
        alloc.setflags(write=False)
        dem.setflags(write=False)
        object.__setattr__(self, "cumulative_allocations", alloc)
        object.__setattr__(self, "cumulative_demands", dem)
        object.__setattr__(
            self, "remaining_budget", max(0.0, float(self.remaining_budget))
        )

    @classmethod
    def initial(cls, instance: Instance) -> "EpisodeState":
        zeros = np.zeros(instance.num_agents)
        return cls(1, instance.budget, zeros, zeros.copy())


def total_utility(
    allocations: AllocationMatrix, demands: DemandMatrix, agent: int
) -> float:
    """Utility of one agent: sum over steps of min(allocation, demand)."""
    if allocations.values.shape != demands.values.shape:
        raise InvalidInputError("allocation and demand matrices must share dimensions")
    return float(
        np.minimum(allocations.values[:, agent], demands.values[:, agent]).sum()
    )


def utilities(allocations: AllocationMatrix, demands: DemandMatrix) -> np.ndarray:
    """Vector of all agents' utilities (min of allocation and demand, summed)."""
    if allocations.values.shape != demands.values.shape:
        raise InvalidInputError("allocation and demand matrices must share dimensions")
    return np.minimum(allocations.values, demands.values).sum(axis=0)


def advance(
    state: EpisodeState, step_allocation, step_demand
) -> EpisodeState:
    """Advance the episode by one step, checking budget feasibility.

    Raises FeasibilityError when the step allocation exceeds the remaining
    budget by more than the tolerance; overshoot within tolerance is clamped.
    """
    alloc = _as_float_array(step_allocation, "step_allocation")
    dem = _as_float_array(step_demand, "step_demand")
    spent = float(alloc.sum())
    if spent > state.remaining_budget + FEASIBILITY_TOL:
        raise FeasibilityError(
            f"step {state.step}: allocation sum {spent:.12g} exceeds remaining "
            f"budget {state.remaining_budget:.12g}"
        )
    return EpisodeState(
        step=state.step + 1,
        remaining_budget=max(0.0, state.remaining_budget - spent),
        cumulative_allocations=state.cumulative_allocations + alloc,
        cumulative_demands=state.cumulative_demands + dem,
    )
