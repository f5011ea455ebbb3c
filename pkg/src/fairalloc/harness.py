"""Monte-Carlo benchmark harness.

Episodes derive their seeds from (master seed, episode index), so a sweep is
bit-reproducible regardless of worker count or execution order. Raw result
files hold one row per (noise level, policy, episode); aggregate files hold
per-(noise level, policy) means and sample stds recomputable from the raw
rows. Wall-times are collected in memory but deliberately kept out of the
files so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .core import DemandMatrix, Instance, InvalidInputError
from .demand import (
    ConfigurationError,
    DemandModel,
    compound_moments,
    configure_setting,
    expected_total_demand,
    fit_empirical,
    moments,
    sample_episode,
)
from .hindsight import solve_hindsight
from .metrics import MetricsReport, compute_metrics, theorem_bound
from .policies import PolicyConfig, run_policy

_FLOAT_FMT = "%.12g"


class IngestError(ValueError):
    """Raised for unusable real-data input files."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One synthetic-sweep description (setting, policies, seeds, output)."""

    setting: str = "symmetric"
    num_agents: int = 50
    horizon: int = 40
    expected_arrivals: float = 2.0
    budget_fraction: float = 0.5
    policies: Tuple[PolicyConfig, ...] = ()
    episodes: int = 200
    master_seed: int = 0
    noise_deltas: Tuple[float, ...] = (0.0,)
    xi: float = 0.1
    output: Optional[str] = None
    format: str = "csv"
    threads: int = 1
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigurationError("episodes must be >= 1")
        if self.budget_fraction <= 0:
            raise ConfigurationError("budget_fraction must be positive")
        if self.format not in ("csv", "structured"):
            raise ConfigurationError(f"unknown output format {self.format!r}")
        if not self.policies:
            raise ConfigurationError("at least one policy is required")
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(
            self, "noise_deltas", tuple(float(d) for d in self.noise_deltas)
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        policies = tuple(
            PolicyConfig.from_dict(p) for p in raw.pop("policies", [])
        )
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        return cls(policies=policies, **raw)

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        import yaml

        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigurationError("config file must hold a mapping")
        return cls.from_dict(raw)

    def base_model(self) -> DemandModel:
        return configure_setting(
            self.setting,
            self.num_agents,
            self.horizon,
            self.expected_arrivals,
            seed=self.master_seed,
        )

    def instance(self, model: Optional[DemandModel] = None) -> Instance:
        model = model if model is not None else self.base_model()
        budget = self.budget_fraction * expected_total_demand(model)
        return Instance(
            self.num_agents, self.horizon, budget, epsilon=self.epsilon
        )


RAW_COLUMNS = (
    "experiment",
    "noise_delta",
    "policy",
    "episode",
    "seed",
) + MetricsReport.FIELD_ORDER


@dataclass
class ResultTable:
    """Raw per-episode rows plus recomputable aggregates."""

    raw_rows: List[dict] = field(default_factory=list)
    aggregate_rows: List[dict] = field(default_factory=list)
    timings: List[float] = field(default_factory=list)

    def recompute_aggregates(self) -> None:
        keys = sorted(
            {(r["noise_delta"], r["policy"]) for r in self.raw_rows},
            key=lambda k: (k[0], k[1]),
        )
        self.aggregate_rows = []
        for delta, policy in keys:
            rows = [
                r
                for r in self.raw_rows
                if r["noise_delta"] == delta and r["policy"] == policy
            ]
            agg = {"noise_delta": delta, "policy": policy, "episodes": len(rows)}
            for name in MetricsReport.FIELD_ORDER:
                vals = np.array([r[name] for r in rows])
                agg[f"{name}_mean"] = float(vals.mean())
                agg[f"{name}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            self.aggregate_rows.append(agg)

    def mean_of(self, policy_label: str, metric: str, noise_delta: float = 0.0) -> float:
        for agg in self.aggregate_rows:
            if agg["policy"] == policy_label and agg["noise_delta"] == noise_delta:
                return agg[f"{metric}_mean"]
        raise KeyError(f"no aggregate for {policy_label!r} at delta {noise_delta}")

    @staticmethod
    def _format_value(value) -> str:
        if isinstance(value, float):
            return _FLOAT_FMT % value
        return str(value)

    def _rows_to_csv(self, rows: Sequence[dict]) -> str:
        if not rows:
            return ""
        columns = list(rows[0].keys())
        buf = io.StringIO()
        buf.write(",".join(columns) + "\n")
        for row in rows:
            buf.write(",".join(self._format_value(row[c]) for c in columns) + "\n")
        return buf.getvalue()

    def raw_csv(self) -> str:
        return self._rows_to_csv(self.raw_rows)

    def aggregate_csv(self) -> str:
        return self._rows_to_csv(self.aggregate_rows)

    def write(self, path: str, fmt: str = "csv") -> None:
        if fmt == "csv":
            with open(path, "w") as fh:
                fh.write(self.raw_csv())
            agg_path = _aggregate_path(path)
            with open(agg_path, "w") as fh:
                fh.write(self.aggregate_csv())
        elif fmt == "structured":
            payload = {
                "raw": [
                    {k: (self._format_value(v) if isinstance(v, float) else v) for k, v in r.items()}
                    for r in self.raw_rows
                ],
                "aggregate": [
                    {k: (self._format_value(v) if isinstance(v, float) else v) for k, v in r.items()}
                    for r in self.aggregate_rows
                ],
            }
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        else:
            raise ConfigurationError(f"unknown output format {fmt!r}")


def _aggregate_path(path: str) -> str:
    if path.endswith(".csv"):
        return path[:-4] + "_aggregate.csv"
    return path + "_aggregate"


def episode_seed(master_seed: int, episode: int) -> int:
    """Stable per-episode seed derivation."""
    return int(np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, episode]).generate_state(1)[0])


def _episode_rows(config: ExperimentConfig, delta: float, episode: int) -> Tuple[List[dict], float]:
    base = config.base_model()
    instance = config.instance(base)
    seed = episode_seed(config.master_seed, episode)
    model = base.with_seed(seed)
    start = time.perf_counter()
    demands = sample_episode(model, instance)
    hind = solve_hindsight(instance, demands)
    table = moments(model.with_noise(delta), 0)
    rows = []
    for policy in config.policies:
        alloc = run_policy(instance, demands, table, policy)
        report = compute_metrics(instance, demands, alloc, hind)
        if report.log_nsw > hind.log_nsw + 1e-9:
            raise RuntimeError(
                f"hindsight dominance violated for {policy.label} on seed {seed}"
            )
        row = {
            "experiment": config.setting,
            "noise_delta": delta,
            "policy": policy.label,
            "episode": episode,
            "seed": seed,
        }
        row.update(report.as_row())
        rows.append(row)
    return rows, time.perf_counter() - start


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run every configured policy on each sampled episode; aggregate.

    Episode failures abort the run with the offending seed in the exception.
    """
    tasks = [
        (delta, episode)
        for delta in config.noise_deltas
        for episode in range(config.episodes)
    ]
    table = ResultTable()
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(
                pool.map(
                    _episode_rows,
                    [config] * len(tasks),
                    [t[0] for t in tasks],
                    [t[1] for t in tasks],
                    chunksize=max(1, len(tasks) // (4 * config.threads)),
                )
            )
    else:
        results = [_episode_rows(config, delta, ep) for delta, ep in tasks]
    for rows, elapsed in results:
        table.raw_rows.extend(rows)
        table.timings.append(elapsed)
    table.recompute_aggregates()
    return table


@dataclass(frozen=True)
class LambdaSearchResult:
    best_lambda: float
    schedule: str
    stats: Tuple[dict, ...]


def lambda_search(
    config: ExperimentConfig,
    grid: Sequence[float],
    schedule: str = "sqrt_decay",
) -> LambdaSearchResult:
    """Evaluate the discounted policy on a lambda grid over a common seed block.

    Returns the grid member with the highest mean log-NSW; ties break toward
    the smaller lambda.
    """
    if not grid:
        raise ConfigurationError("lambda grid must be non-empty")
    stats = []
    best_lambda = None
    best_value = -np.inf
    for lam in sorted(float(g) for g in grid):
        policy = PolicyConfig("saffe_d", lambda_value=lam, lambda_schedule=schedule)
        sub = dataclasses.replace(config, policies=(policy,), noise_deltas=(0.0,))
        table = run_experiment(sub)
        agg = table.aggregate_rows[0]
        stats.append(
            {
                "lambda": lam,
                "schedule": schedule,
                "log_nsw_mean": agg["log_nsw_mean"],
                "log_nsw_std": agg["log_nsw_std"],
                "utilization_mean": agg["utilization_pct_mean"],
            }
        )
        if agg["log_nsw_mean"] > best_value + 1e-12:
            best_value = agg["log_nsw_mean"]
            best_lambda = lam
    return LambdaSearchResult(best_lambda, schedule, tuple(stats))


@dataclass(frozen=True)
class BoundReport:
    xi: float
    regime: str
    bound: float
    episodes: int
    within_fraction: float
    passed: bool


def validate_bounds(config: ExperimentConfig, xi: Optional[float] = None) -> BoundReport:
    """Check the worst-agent gap bound empirically.

    Runs the discounted policy with lambda(t) = sqrt((T - t) / xi), compares
    each episode's unnormalized worst-agent gap to the closed-form bound, and
    requires the within-bound fraction to reach 1 - xi.
    """
    xi = config.xi if xi is None else float(xi)
    if not (0.0 < xi < 1.0):
        raise ConfigurationError("xi must lie in (0, 1)")
    base = config.base_model()
    instance = config.instance(base)
    _, std_spread = _model_std_range(base)
    regime = "balanced" if std_spread <= 1e-9 else "unbalanced"
    bound = theorem_bound(instance, base, xi, regime)
    policy = PolicyConfig(
        "saffe_d", lambda_value=1.0 / np.sqrt(xi), lambda_schedule="sqrt_decay",
        label="saffe_d[chebyshev]",
    )
    sub = dataclasses.replace(config, policies=(policy,), noise_deltas=(0.0,))
    table = run_experiment(sub)
    gaps = np.array([row["delta_a_max_raw"] for row in table.raw_rows])
    within = float(np.mean(gaps <= bound + 1e-9))
    return BoundReport(
        xi=xi,
        regime=regime,
        bound=float(bound),
        episodes=len(gaps),
        within_fraction=within,
        passed=within >= 1.0 - xi,
    )


def _model_std_range(model: DemandModel) -> Tuple[float, float]:
    _, std = compound_moments(model.arrival_prob, model.demand_mean, model.demand_std)
    return float(std.max()), float(std.max() - std.min())


def erase_arrivals(demands: DemandMatrix, keep_prob: float, seed: int) -> DemandMatrix:
    """Keep each positive entry independently with probability ``keep_prob``.

    Agents left with no surviving arrival get exactly one of their original
    arrivals restored (uniformly chosen), mirroring the generator guarantee.
    """
    if not (0.0 <= keep_prob <= 1.0):
        raise InvalidInputError("keep probability must lie in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([0xE7A5E, seed & 0xFFFFFFFFFFFFFFFF]))
    values = demands.values.copy()
    positive = values > 0
    keep = rng.random(values.shape) < keep_prob
    values[positive & ~keep] = 0.0
    for i in np.flatnonzero(values.sum(axis=0) <= 0):
        original = np.flatnonzero(demands.values[:, i] > 0)
        if original.size == 0:
            continue
        t = int(original[rng.integers(original.size)])
        values[t, i] = demands.values[t, i]
    return DemandMatrix(values, require_activity=False)


def ingest_sales(
    csv_path: str,
    agent_column: str = "agent",
    value_column: str = "value",
    date_column: str = "date",
    date_format: Optional[str] = None,
) -> pd.DataFrame:
    """Read a sales CSV into per-agent daily totals (date, agent, value).

    Finer-grained rows (e.g. per-item sales) are summed into one row per
    agent-day; output is chronologically sorted.
    """
    try:
        df = pd.read_csv(csv_path)
    except Exception as exc:
        raise IngestError(f"cannot parse {csv_path}: {exc}") from exc
    for col in (agent_column, value_column, date_column):
        if col not in df.columns:
            raise IngestError(f"missing column {col!r} in {csv_path}")
    dates = pd.to_datetime(df[date_column], format=date_format, errors="coerce")
    bad = dates.isna()
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2  # header is line 1
        raise IngestError(f"unparsable date at line {line} of {csv_path}")
    values = pd.to_numeric(df[value_column], errors="coerce")
    bad = values.isna()
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise IngestError(f"unparsable value at line {line} of {csv_path}")
    out = pd.DataFrame(
        {"date": dates.dt.normalize(), "agent": df[agent_column], "value": values}
    )
    out = out.groupby(["agent", "date"], as_index=False)["value"].sum()
    empty = out.groupby("agent")["value"].count() == 0
    if empty.any():
        raise IngestError(f"empty series for agents {list(empty[empty].index)}")
    return out.sort_values(["date", "agent"], kind="stable").reset_index(drop=True)


def real_data_experiment(
    history: pd.DataFrame,
    split_date: str,
    period: int = 7,
    budget_fraction: float = 0.5,
    policies: Sequence[PolicyConfig] = (),
    keep_prob: float = 1.0,
    seed: int = 0,
    epsilon: float = 1e-6,
    max_episodes: Optional[int] = None,
) -> ResultTable:
    """Fit seasonal moments before ``split_date``, evaluate policies after.

    The evaluation range is cut into consecutive ``period``-day episodes;
    each day's per-agent total is that day's demand. ``keep_prob`` < 1
    sparsifies arrivals by erasure, and the model handed to the policies
    carries the same arrival probability so forecasts stay consistent.
    """
    split = pd.Timestamp(split_date)
    fit = history[history["date"] < split]
    eval_part = history[history["date"] >= split]
    if fit.empty or eval_part.empty:
        raise IngestError("split date leaves an empty fit or evaluation range")
    model = fit_empirical(fit, period)
    agents = sorted(history["agent"].unique())
    n = len(agents)

    # Align model phases with episode steps: episodes start at the first
    # evaluation date, whose phase offset from the fit origin is constant
    # modulo the period across episodes.
    origin = fit["date"].min()
    eval_start = eval_part["date"].min()
    shift = int((eval_start - origin).days % period)
    mean = np.roll(model.demand_mean, -shift, axis=0)
    std = np.roll(model.demand_std, -shift, axis=0)
    model = DemandModel(
        kind="empirical",
        arrival_prob=np.full((period, n), keep_prob),
        demand_mean=mean,
        demand_std=std,
    )
    budget = budget_fraction * expected_total_demand(model)
    instance = Instance(n, period, budget, epsilon=epsilon)

    pivot = eval_part.pivot_table(
        index="date", columns="agent", values="value", aggfunc="sum", fill_value=0.0
    ).reindex(columns=agents, fill_value=0.0)
    full_range = pd.date_range(eval_start, eval_part["date"].max(), freq="D")
    pivot = pivot.reindex(full_range, fill_value=0.0)
    n_episodes = len(full_range) // period
    if max_episodes is not None:
        n_episodes = min(n_episodes, max_episodes)
    if n_episodes == 0:
        raise IngestError("evaluation range shorter than one period")

    table = ResultTable()
    for ep in range(n_episodes):
        block = pivot.iloc[ep * period : (ep + 1) * period].to_numpy(dtype=float)
        if block.sum() <= 0:
            continue
        demands = DemandMatrix(block, require_activity=False)
        if keep_prob < 1.0:
            demands = erase_arrivals(demands, keep_prob, episode_seed(seed, ep))
            if demands.values.sum() <= 0:
                continue
        hind = solve_hindsight(instance, demands)
        for policy in policies:
            alloc = run_policy(instance, demands, model, policy)
            report = compute_metrics(instance, demands, alloc, hind)
            row = {
                "experiment": "real_data",
                "noise_delta": 0.0,
                "policy": policy.label,
                "episode": ep,
                "seed": seed,
            }
            row.update(report.as_row())
            table.raw_rows.append(row)
    table.recompute_aggregates()
    return table
