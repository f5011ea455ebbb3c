"""Finite-horizon MDP view of the allocation problem.

The step reward is the weighted increment of each current demander's
log-utility; with the ledger baseline at log(epsilon) the per-episode rewards
telescope exactly to sum_i w_i * (log(u_i + eps) - log(eps)). All returned
values use that convention, so they are directly comparable to the offline
baseline after stripping the -log(eps) constant.

``dp_solve`` runs exact backward induction on a discretized version of the
problem: allocations live on a regular grid, so cumulative utilities and the
remaining budget stay on the grid as well, and under independent per-step
demands the pair (cumulative utilities, time) is a sufficient state.
Intended for desk-scale instances (N <= 3, T <= 4) as an optimality oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .core import AllocationMatrix, DemandMatrix, EpisodeState, Instance, InvalidInputError, advance
from .demand import MomentTable
from .hindsight import solve_hindsight
from .policies import PolicyConfig, step_allocation

DEFAULT_STATE_ACTION_CAP = 10**7


class ResourceError(RuntimeError):
    """Raised when the enumerated state-action count exceeds the cap."""


@dataclass
class RewardLedger:
    """Running per-agent utilities backing the step-reward computation.

    The baseline utility is log(epsilon) (a cumulative min-utility of zero),
    which keeps every step reward nonnegative and makes episode returns
    telescope exactly.
    """

    weights: np.ndarray
    epsilon: float
    cumulative_utility: np.ndarray = None
    rewards: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.cumulative_utility is None:
            self.cumulative_utility = np.zeros_like(self.weights)
        else:
            self.cumulative_utility = np.asarray(self.cumulative_utility, dtype=float)


def step_reward(ledger: RewardLedger, demand, allocation, weights=None) -> float:
    """Reward of one step; updates the ledger in place.

    Only current demanders contribute, each with the weighted increase of
    log(cumulative satisfied demand + epsilon).
    """
    demand = np.asarray(demand, dtype=float)
    allocation = np.asarray(allocation, dtype=float)
    w = ledger.weights if weights is None else np.asarray(weights, dtype=float)
    gained = np.minimum(allocation, demand)
    before = ledger.cumulative_utility
    after = before + gained
    demander = demand > 0
    eps = ledger.epsilon
    reward = float(
        (w[demander] * (np.log(after[demander] + eps) - np.log(before[demander] + eps))).sum()
    )
    ledger.cumulative_utility = after
    ledger.rewards.append(reward)
    return reward


def episode_return(demands: DemandMatrix, allocations: AllocationMatrix, weights, epsilon: float) -> float:
    """Sum of step rewards over a full episode."""
    if demands.values.shape != allocations.values.shape:
        raise InvalidInputError("demand and allocation matrices must share dimensions")
    ledger = RewardLedger(weights=weights, epsilon=epsilon)
    total = 0.0
    for t in range(demands.horizon):
        total += step_reward(ledger, demands.values[t], allocations.values[t])
    return total


@dataclass(frozen=True)
class DiscreteMDP:
    """Desk-scale discretization: finite demand supports and an allocation grid.

    ``support_values[t][i]`` and ``support_probs[t][i]`` list the atoms of
    agent i's demand at step t (probabilities summing to 1). ``delta_a``
    defaults to budget / 40.
    """

    instance: Instance
    support_values: tuple
    support_probs: tuple
    delta_a: float = None
    state_action_cap: int = DEFAULT_STATE_ACTION_CAP

    def __post_init__(self):
        inst = self.instance
        if len(self.support_values) != inst.horizon:
            raise InvalidInputError("supports must cover every step")
        vals = tuple(
            tuple(np.asarray(v, dtype=float) for v in row) for row in self.support_values
        )
        probs = tuple(
            tuple(np.asarray(p, dtype=float) for p in row) for row in self.support_probs
        )
        for row_v, row_p in zip(vals, probs):
            if len(row_v) != inst.num_agents or len(row_p) != inst.num_agents:
                raise InvalidInputError("supports must cover every agent")
            for v, p in zip(row_v, row_p):
                if v.shape != p.shape or np.any(v < 0) or np.any(p < 0):
                    raise InvalidInputError("invalid demand support")
                if abs(p.sum() - 1.0) > 1e-9:
                    raise InvalidInputError("support probabilities must sum to 1")
        object.__setattr__(self, "support_values", vals)
        object.__setattr__(self, "support_probs", probs)
        if self.delta_a is None:
            object.__setattr__(self, "delta_a", inst.budget / 40.0)
        if self.delta_a <= 0:
            raise InvalidInputError("delta_a must be positive")

    @property
    def budget_units(self) -> int:
        return int(np.floor(self.instance.budget / self.delta_a + 1e-9))

    def outcomes(self, t: int) -> List[Tuple[np.ndarray, float]]:
        """Joint demand outcomes (value vector, probability) at step t."""
        inst = self.instance
        per_agent = [
            list(zip(self.support_values[t][i], self.support_probs[t][i]))
            for i in range(inst.num_agents)
        ]
        result = []
        for combo in itertools.product(*per_agent):
            x = np.array([v for v, _ in combo])
            p = float(np.prod([q for _, q in combo]))
            if p > 0:
                result.append((x, p))
        return result

    def moment_table(self) -> MomentTable:
        """Analytic per-step mean/std of the supports, for moment-based policies."""
        inst = self.instance
        mean = np.zeros((inst.horizon, inst.num_agents))
        std = np.zeros((inst.horizon, inst.num_agents))
        for t in range(inst.horizon):
            for i in range(inst.num_agents):
                v = self.support_values[t][i]
                p = self.support_probs[t][i]
                m = float((v * p).sum())
                mean[t, i] = m
                std[t, i] = float(np.sqrt(max(0.0, (v**2 * p).sum() - m**2)))
        return MomentTable(mean, std)


def _check_cap(mdp: DiscreteMDP) -> None:
    inst = mdp.instance
    bu = mdp.budget_units
    states = (bu + 1) ** inst.num_agents
    total = 0
    for t in range(inst.horizon):
        n_outcomes = int(
            np.prod([len(mdp.support_values[t][i]) for i in range(inst.num_agents)])
        )
        actions = int(
            np.prod(
                [
                    min(bu, int(np.floor(mdp.support_values[t][i].max() / mdp.delta_a + 1e-9))) + 1
                    for i in range(inst.num_agents)
                ]
            )
        )
        total += n_outcomes * states * actions
    if total > mdp.state_action_cap:
        raise ResourceError(
            f"state-action count {total} exceeds cap {mdp.state_action_cap}"
        )


def dp_solve(mdp: DiscreteMDP) -> Tuple[float, Dict]:
    """Exact backward induction on the grid.

    Returns the optimal expected return (episode_return convention) and a
    policy lookup mapping (step, cumulative-allocation units, outcome index)
    to an allocation-unit tuple.
    """
    _check_cap(mdp)
    inst = mdp.instance
    n = inst.num_agents
    bu = mdp.budget_units
    da = mdp.delta_a
    eps = inst.epsilon
    shape = (bu + 1,) * n
    grid = np.arange(bu + 1)
    # total units already allocated, per state
    spent = np.zeros(shape)
    for axis in range(n):
        spent = spent + grid.reshape([-1 if a == axis else 1 for a in range(n)])
    log_grid = np.log(grid * da + eps)

    value = np.zeros(shape)
    policy: Dict = {}
    for t in range(inst.horizon - 1, -1, -1):
        next_value = value
        value = np.zeros(shape)
        for oi, (x, prob) in enumerate(mdp.outcomes(t)):
            max_units = [min(bu, int(np.floor(x[i] / da + 1e-9))) for i in range(n)]
            best = np.full(shape, -np.inf)
            best_action = np.zeros(shape + (n,), dtype=int)
            for action in itertools.product(*(range(m + 1) for m in max_units)):
                a_total = sum(action)
                if a_total > bu:
                    continue
                src = tuple(slice(0, bu + 1 - a) for a in action)
                dst = tuple(slice(a, bu + 1) for a in action)
                cand = next_value[dst].copy()
                for axis, a in enumerate(action):
                    if a == 0 or x[axis] <= 0:
                        continue
                    seg = grid[: bu + 1 - action[axis]]
                    r = inst.weights[axis] * (log_grid[seg + a] - log_grid[seg])
                    cand += r.reshape([-1 if ax == axis else 1 for ax in range(n)])
                feasible = spent[src] + a_total <= bu
                cand = np.where(feasible, cand, -np.inf)
                region_best = best[src]
                better = cand > region_best + 1e-15
                if np.any(better):
                    best[src] = np.where(better, cand, region_best)
                    act = np.array(action)
                    sel = best_action[src]
                    sel[better] = act
                    best_action[src] = sel
            reachable = best > -np.inf
            value[reachable] += prob * best[reachable]
            for idx in np.argwhere(reachable):
                policy[(t, tuple(int(v) for v in idx), oi)] = tuple(
                    int(v) for v in best_action[tuple(idx)]
                )
    origin = (0,) * n
    return float(value[origin]), policy


def evaluate_policy_on_mdp(mdp: DiscreteMDP, config: PolicyConfig) -> float:
    """Exact expected return of a policy, enumerating the demand support.

    The policy's step allocations are floored onto the grid before advancing,
    so the evaluation is of the grid-projected policy and the DP value is a
    true upper bound for it.
    """
    inst = mdp.instance
    da = mdp.delta_a
    table = mdp.moment_table()
    per_step_outcomes = [mdp.outcomes(t) for t in range(inst.horizon)]
    n_paths = int(np.prod([len(o) for o in per_step_outcomes]))
    if n_paths * inst.horizon > mdp.state_action_cap:
        raise ResourceError(f"demand support enumeration too large ({n_paths} paths)")

    total = 0.0
    for path in itertools.product(*per_step_outcomes):
        prob = float(np.prod([p for _, p in path]))
        if prob == 0.0:
            continue
        demand_rows = np.stack([x for x, _ in path])
        demands = DemandMatrix(demand_rows)
        state = EpisodeState.initial(inst)
        rows = np.zeros_like(demand_rows)
        for t0 in range(inst.horizon):
            x = demand_rows[t0]
            realized = demand_rows[t0 + 1 :] if config.kind == "saffe_oracle" else None
            alloc = step_allocation(config, inst, state, x, table, realized)
            alloc = np.floor(alloc / da + 1e-12) * da
            rows[t0] = alloc
            state = advance(state, alloc, x)
        ret = episode_return(
            demands, AllocationMatrix(rows), inst.weights, inst.epsilon
        )
        total += prob * ret
    return total


def expected_hindsight_return(mdp: DiscreteMDP) -> float:
    """Expected offline-optimal return over the enumerated demand support."""
    inst = mdp.instance
    eps = inst.epsilon
    per_step_outcomes = [mdp.outcomes(t) for t in range(inst.horizon)]
    total = 0.0
    for path in itertools.product(*per_step_outcomes):
        prob = float(np.prod([p for _, p in path]))
        if prob == 0.0:
            continue
        demand_rows = np.stack([x for x, _ in path])
        demands = DemandMatrix(demand_rows)
        solution = solve_hindsight(inst, demands)
        active = demands.totals() > 0
        ret = float(
            (
                inst.weights[active]
                * (np.log(solution.totals[active] + eps) - np.log(eps))
            ).sum()
        )
        total += prob * ret
    return total
