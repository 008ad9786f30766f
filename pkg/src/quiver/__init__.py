"""Cost-aware interactive evolutionary multi-objective optimization.

This package combines an NSGA-II style evolutionary backbone with a
particle-filter posterior over decision-maker preference weights and a
cost-sensitive controller that decides, at every step, whether the next
unit of budget is best spent on an objective evaluation, a pairwise
comparison query, or an importance-adjustment query.
"""

from quiver.metrics import RunMetrics, aggregate, ia_fraction, run_metrics, utility_regret
from quiver.orchestrator import POLICIES, RunConfig, RunTrace, run
from quiver.problems import (
    FrontSample,
    ProblemSpec,
    evaluate,
    evaluate_batch,
    front_optimal_utility,
    front_radii,
    front_surface_residual,
    get_problem,
    sample_front,
)

__all__ = [
    "FrontSample",
    "POLICIES",
    "ProblemSpec",
    "RunConfig",
    "RunMetrics",
    "RunTrace",
    "aggregate",
    "evaluate",
    "evaluate_batch",
    "front_optimal_utility",
    "front_radii",
    "front_surface_residual",
    "get_problem",
    "ia_fraction",
    "run",
    "run_metrics",
    "sample_front",
    "utility_regret",
]

__version__ = "0.1.0"
