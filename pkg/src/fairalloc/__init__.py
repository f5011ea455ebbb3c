"""Sequential fair resource allocation: water-filling solvers, online
policies, demand models, an MDP view with a desk-scale DP oracle, fairness
metrics, and a reproducible Monte-Carlo benchmark harness."""

from .core import (
    AllocationMatrix,
    DemandMatrix,
    EpisodeState,
    FeasibilityError,
    Instance,
    InvalidInputError,
    advance,
    total_utility,
    utilities,
)
from .demand import (
    DemandModel,
    MomentTable,
    configure_setting,
    expected_total_demand,
    fit_empirical,
    moments,
    sample_episode,
)
from .hindsight import HindsightSolution, solve_hindsight
from .metrics import MetricsReport, compute_metrics, guardrail_bands, theorem_bound
from .policies import (
    Forecast,
    PolicyConfig,
    greedy_step,
    guarded_hope_run,
    hope_online_step,
    run_policy,
    saffe_oracle_step,
    saffe_step,
)
from .waterfill import WaterfillResult, waterfill, waterfill_with_past

__all__ = [
    "AllocationMatrix",
    "DemandMatrix",
    "DemandModel",
    "EpisodeState",
    "FeasibilityError",
    "Forecast",
    "HindsightSolution",
    "Instance",
    "InvalidInputError",
    "MetricsReport",
    "MomentTable",
    "PolicyConfig",
    "WaterfillResult",
    "advance",
    "compute_metrics",
    "configure_setting",
    "expected_total_demand",
    "fit_empirical",
    "greedy_step",
    "guarded_hope_run",
    "guardrail_bands",
    "hope_online_step",
    "moments",
    "run_policy",
    "saffe_oracle_step",
    "saffe_step",
    "sample_episode",
    "solve_hindsight",
    "theorem_bound",
    "total_utility",
    "utilities",
    "waterfill",
    "waterfill_with_past",
]

__version__ = "0.1.0"
