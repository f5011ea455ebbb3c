"""Shared fixtures and independent reference solvers used only by tests."""

from __future__ import annotations

import numpy as np
import pytest

from fairalloc import DemandModel, Instance


def kkt_waterfill_oracle(demands, weights, budget, past=None, iterations=60):
    """Reference water-filling solver: bisection on the level mu.

    Solves max sum_i w_i log(past_i + C_i) s.t. 0 <= C_i <= demand_i,
    sum C_i <= budget, through its KKT characterization
    past_i + C_i = clip(w_i * mu, past_i, past_i + demand_i). Deliberately
    independent of the production implementation (no sorting, no breakpoint
    interpolation): mu is found by bisection on the monotone spend curve.
    """
    demands = np.asarray(demands, dtype=float)
    weights = np.asarray(weights, dtype=float)
    past = np.zeros_like(demands) if past is None else np.asarray(past, dtype=float)
    active = demands > 0
    out = np.zeros_like(demands)
    if not np.any(active):
        return out
    x, w, p = demands[active], weights[active], past[active]
    if budget >= x.sum():
        out[active] = x
        return out

    def spend(mu):
        return np.minimum(x, np.clip(w * mu - p, 0.0, None)).sum()

    lo = 0.0
    hi = float(((p + x) / w).max()) + 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if spend(mid) < budget:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    out[active] = np.minimum(x, np.clip(w * mu - p, 0.0, None))
    # Bisection leaves a tiny spend residue; rescale it onto unsaturated
    # agents so the oracle is budget-exhausting to ~1e-12.
    short = budget - out[active].sum()
    room = np.clip(x - out[active], 0.0, None)
    if short > 0 and room.sum() > 0:
        filled = out[active] + short * room / room.sum()
        out[active] = np.minimum(x, filled)
    return out


def random_waterfill_instance(rng, max_agents=6, with_past=True):
    """One random instance matching the reference-solver comparison domain."""
    n = int(rng.integers(1, max_agents + 1))
    demands = rng.uniform(0.0, 20.0, size=n)
    if rng.random() < 0.2:
        demands[rng.integers(n)] = 0.0
    weights = rng.uniform(0.2, 5.0, size=n) if rng.random() < 0.5 else np.ones(n)
    budget = float(rng.uniform(0.0, 20.0))
    past = (
        rng.uniform(0.0, 10.0, size=n)
        if with_past and rng.random() < 0.7
        else np.zeros(n)
    )
    return demands, weights, budget, past


def random_episode(rng, max_agents=8, max_horizon=8):
    """A small random (instance, demand matrix) pair for end-to-end checks."""
    from fairalloc import DemandMatrix

    n = int(rng.integers(1, max_agents + 1))
    t = int(rng.integers(1, max_horizon + 1))
    values = rng.uniform(0.0, 10.0, size=(t, n))
    values[rng.random(size=(t, n)) < 0.4] = 0.0
    for i in np.flatnonzero(values.sum(axis=0) <= 0):
        values[rng.integers(t), i] = float(rng.uniform(0.5, 10.0))
    weights = rng.uniform(0.5, 3.0, size=n) if rng.random() < 0.5 else np.ones(n)
    budget = float(rng.uniform(0.1, 1.0) * values.sum())
    instance = Instance(n, t, budget, weights=weights)
    return instance, DemandMatrix(values, require_activity=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def small_model():
    """Deterministic-arrival two-agent model over three steps."""
    p = np.ones((3, 2))
    mu = np.array([[4.0, 2.0], [4.0, 2.0], [4.0, 2.0]])
    sigma = np.array([[1.0, 0.5], [1.0, 0.5], [1.0, 0.5]])
    return DemandModel("deterministic", p, mu, sigma, seed=7)
