"""Stochastic demand processes and their analytic moments.

Per-step demand is compound Bernoulli-Normal: with probability p_i^t the agent
draws Normal(mu_i^t, sigma_i^t^2) clamped at zero, otherwise it demands
nothing. Negative draws are clamped rather than resampled (cheap, and the
bias is negligible at sigma = mu/5); the moment tables keep the unclamped
analytic values, which is what the online policies consume.

Mean-estimation noise for sensitivity studies scales reported means by
(1 + noise_delta); standard deviations are reported unperturbed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import DemandMatrix, Instance, InvalidInputError

_REPAIR_RETRIES = 100


class EstimationError(ValueError):
    """Raised when a phase has too few observations to estimate moments."""


class ConfigurationError(ValueError):
    """Raised for invalid setting parameters."""


@dataclass(frozen=True)
class DemandModel:
    """Per-agent, per-step compound Bernoulli-Normal demand process.

    Arrays have shape (T, N). ``seed`` fully determines sampled episodes.
    """

    kind: str
    arrival_prob: np.ndarray
    demand_mean: np.ndarray
    demand_std: np.ndarray
    noise_delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.arrival_prob, dtype=float)
        mu = np.asarray(self.demand_mean, dtype=float)
        sigma = np.asarray(self.demand_std, dtype=float)
        if p.ndim != 2 or p.shape != mu.shape or p.shape != sigma.shape:
            raise ConfigurationError("parameter arrays must share shape (T, N)")
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigurationError("arrival probabilities must lie in [0, 1]")
        if np.any(sigma < 0) or np.any(mu < 0):
            raise ConfigurationError("demand means and stds must be nonnegative")
        for arr, name in ((p, "arrival_prob"), (mu, "demand_mean"), (sigma, "demand_std")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.arrival_prob.shape[0]

    @property
    def num_agents(self) -> int:
        return self.arrival_prob.shape[1]

    def with_seed(self, seed: int) -> "DemandModel":
        return dataclasses.replace(self, seed=int(seed))

    def with_noise(self, delta: float) -> "DemandModel":
        return dataclasses.replace(self, noise_delta=float(delta))


@dataclass(frozen=True)
class MomentTable:
    """Analytic mean and std of per-step demands for a block of future steps.

    Row k describes step from_step + 1 + k (1-based). Means include the
    (1 + delta) estimation-noise factor; stds are the true compound values.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != std.shape:
            raise InvalidInputError("mean and std tables must share shape")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def steps(self) -> int:
        return self.mean.shape[0]


def compound_moments(p, mu, sigma):
    """Mean and std of the Bernoulli(p) * Normal(mu, sigma^2) compound."""
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mean = p * mu
    var = p * (sigma**2 + mu**2) - mean**2
    return mean, np.sqrt(np.clip(var, 0.0, None))


def moments(model: DemandModel, from_step: int = 0) -> MomentTable:
    """Analytic moments for steps from_step+1 .. T (0 rows at the horizon)."""
    if from_step > model.horizon:
        raise InvalidInputError("from_step exceeds the horizon")
    sl = slice(from_step, model.horizon)
    mean, std = compound_moments(
        model.arrival_prob[sl], model.demand_mean[sl], model.demand_std[sl]
    )
    return MomentTable(mean=(1.0 + model.noise_delta) * mean, std=std)


def expected_total_demand(model: DemandModel) -> float:
    """Total expected demand over all agents and steps (true means, no noise)."""
    return float((model.arrival_prob * model.demand_mean).sum())


def _draw_column(rng, p, mu, sigma):
    arrivals = rng.random(p.shape[0]) < p
    draws = np.clip(rng.normal(mu, sigma), 0.0, None)
    return np.where(arrivals, draws, 0.0)


def sample_episode(model: DemandModel, instance: Instance) -> DemandMatrix:
    """Draw one demand matrix; deterministic given the model's seed.

    Every agent with any positive arrival probability is guaranteed at least
    one strictly positive entry: an all-zero column is redrawn from its own
    derived stream, and after a bounded number of retries one arrival is
    forced at a uniformly chosen reachable step. Agents whose arrival
    probability is zero at every step legitimately stay at zero.
    """
    if (model.horizon, model.num_agents) != (instance.horizon, instance.num_agents):
        raise InvalidInputError("model shape does not match the instance")
    rng = np.random.default_rng(np.random.SeedSequence([0x5EED, model.seed & 0xFFFFFFFFFFFFFFFF]))
    p, mu, sigma = model.arrival_prob, model.demand_mean, model.demand_std
    arrivals = rng.random(p.shape) < p
    draws = np.clip(rng.normal(mu, sigma), 0.0, None)
    values = np.where(arrivals, draws, 0.0)

    can_demand = (p > 0).any(axis=0)
    for i in np.flatnonzero((values.sum(axis=0) <= 0) & can_demand):
        col = values[:, i]
        for retry in range(_REPAIR_RETRIES):
            sub = np.random.default_rng(
                np.random.SeedSequence([0x5EED, model.seed & 0xFFFFFFFFFFFFFFFF, i, retry + 1])
            )
            col = _draw_column(sub, p[:, i], mu[:, i], sigma[:, i])
            if col.sum() > 0:
                break
        if col.sum() <= 0:
            sub = np.random.default_rng(
                np.random.SeedSequence([0x5EED, model.seed & 0xFFFFFFFFFFFFFFFF, i, 0])
            )
            reachable = np.flatnonzero(p[:, i] > 0)
            t = int(reachable[sub.integers(reachable.size)])
            forced = np.clip(sub.normal(mu[t, i], sigma[t, i]), 0.0, None)
            if forced <= 0:
                forced = mu[t, i] if mu[t, i] > 0 else 1.0
            col = np.zeros(model.horizon)
            col[t] = forced
        values[:, i] = col
    return DemandMatrix(values, require_activity=bool(can_demand.all()))


def fit_empirical(history: pd.DataFrame, period: int) -> DemandModel:
    """Estimate per-agent seasonal moments from dated per-agent totals.

    ``history`` needs columns date, agent, value with one row per agent-day.
    Phase k collects observations whose day offset from the earliest date is
    congruent to k modulo ``period``; each phase needs at least two
    observations for a sample std (ddof=1). Arrivals are deterministic
    (p = 1); sparsity, when wanted, is imposed downstream by erasure.
    """
    if history.empty:
        raise EstimationError("history is empty")
    if period < 1:
        raise InvalidInputError("period must be >= 1")
    df = history.copy()
    df["date"] = pd.to_datetime(df["date"])
    origin = df["date"].min()
    df["phase"] = (df["date"] - origin).dt.days % period
    agents = sorted(df["agent"].unique())
    n = len(agents)
    mean = np.zeros((period, n))
    std = np.zeros((period, n))
    grouped = df.groupby(["agent", "phase"])["value"]
    counts = grouped.count()
    for j, agent in enumerate(agents):
        for phase in range(period):
            key = (agent, phase)
            if key not in counts.index or counts[key] < 2:
                raise EstimationError(
                    f"agent {agent!r}, phase {phase}: need at least 2 observations"
                )
        stats = df[df["agent"] == agent].groupby("phase")["value"]
        mean[:, j] = stats.mean().reindex(range(period)).to_numpy()
        std[:, j] = stats.std(ddof=1).reindex(range(period)).to_numpy()
    return DemandModel(
        kind="empirical",
        arrival_prob=np.ones((period, n)),
        demand_mean=mean,
        demand_std=std,
    )


def _group_shapes(horizon: int) -> dict:
    t = np.arange(1, horizon + 1, dtype=float)
    return {"early": horizon - t, "late": t, "uniform": np.ones(horizon)}


def configure_setting(
    name: str,
    n: int,
    t: int,
    expected_arrivals: float,
    seed: int = 0,
) -> DemandModel:
    """Build one of the three synthetic settings.

    symmetric:      homogeneous Bernoulli arrivals p = c/T, Normal demands with
                    mu_i ~ Uniform(10, 100) and sigma_i = mu_i / 5.
    ask_groups:     arrival probability shaped over time in thirds
                    (early / late / uniform), normalized so every agent has
                    the same expected number of visits.
    demand_groups:  homogeneous arrivals with demand means shaped over time
                    in thirds, normalized so the three groups have equal
                    total expected demand.
    """
    if expected_arrivals > t:
        raise ConfigurationError("expected_arrivals cannot exceed the horizon")
    if expected_arrivals <= 0:
        raise ConfigurationError("expected_arrivals must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([0xC0FF, seed]))
    base_mu = rng.uniform(10.0, 100.0, size=n)
    base_sigma = base_mu / 5.0
    c = float(expected_arrivals)
    shapes = _group_shapes(t)

    if name in ("symmetric", "symmetric_equal"):
        if name == "symmetric_equal":
            # Identical agents (mu = 50, sigma = 10): the balanced regime of
            # the concentration bounds.
            base_mu = np.full(n, 50.0)
            base_sigma = base_mu / 5.0
        p = np.full((t, n), c / t)
        mu = np.tile(base_mu, (t, 1))
        sigma = np.tile(base_sigma, (t, 1))
        return DemandModel(name, p, mu, sigma, seed=seed)

    if name in ("ask_groups", "demand_groups"):
        if n % 3 != 0:
            raise ConfigurationError(f"{name} requires N divisible by 3")
        third = n // 3
        groups = [range(0, third), range(third, 2 * third), range(2 * third, n)]
        order = ["early", "late", "uniform"]

        if name == "ask_groups":
            p = np.zeros((t, n))
            for grp, key in zip(groups, order):
                shape = shapes[key]
                profile = np.minimum(1.0, c * shape / shape.sum())
                for i in grp:
                    p[:, i] = profile
            mu = np.tile(base_mu, (t, 1))
            sigma = np.tile(base_sigma, (t, 1))
            return DemandModel("nonsym_arrivals", p, mu, sigma, seed=seed)

        # demand_groups: constant p, time-shaped means, equal group totals.
        p = np.full((t, n), c / t)
        mu = np.zeros((t, n))
        for grp, key in zip(groups, order):
            shape = shapes[key]
            profile = shape * t / shape.sum()
            for i in grp:
                mu[:, i] = base_mu[i] * profile
        raw_totals = [
            float((p[:, list(grp)] * mu[:, list(grp)]).sum()) for grp in groups
        ]
        target = float(np.mean(raw_totals))
        for grp, raw in zip(groups, raw_totals):
            mu[:, list(grp)] *= target / raw
        sigma = np.tile(base_sigma, (t, 1))
        return DemandModel("nonsym_demands", p, mu, sigma, seed=seed)

    raise ConfigurationError(f"unknown setting {name!r}")
