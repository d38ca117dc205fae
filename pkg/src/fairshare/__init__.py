"""Fair allocation of multiple divisible resources under entitlements.

Each user either receives everything they asked for or receives at least
their entitlement on some saturated (bottleneck) resource. The solver
follows a barrier-function trajectory to such an allocation; independent
brute-force oracles and a verifier keep it honest, and a weighted
dominant-resource-fairness comparator is included for side-by-side reports.
"""
from .drf import DrfResult, dominant_share, solve_drf
from .model import (
    LiftedInstance,
    ProblemInstance,
    Solution,
    ToleranceConfig,
    Violation,
    bottleneck_set,
    resource_usage,
    usages,
    utility,
    validate_instance,
)
from .oracle import (
    SolutionFamily,
    enumerate_solutions,
    grid_search_n2,
    random_instance,
)
from .reductions import ReductionTrace, lift_solution, preprocess, replay
from .solver import (
    InvalidInstanceError,
    SolveResult,
    TrajectoryPoint,
    gradient,
    integrate_trajectory,
    level_value,
    solve,
    trajectory_derivative,
)
from .verifier import VerificationReport, verify

__version__ = "0.1.0"

__all__ = [
    "DrfResult",
    "InvalidInstanceError",
    "LiftedInstance",
    "ProblemInstance",
    "ReductionTrace",
    "Solution",
    "SolutionFamily",
    "SolveResult",
    "ToleranceConfig",
    "TrajectoryPoint",
    "VerificationReport",
    "Violation",
    "bottleneck_set",
    "dominant_share",
    "enumerate_solutions",
    "gradient",
    "grid_search_n2",
    "integrate_trajectory",
    "level_value",
    "lift_solution",
    "preprocess",
    "random_instance",
    "replay",
    "resource_usage",
    "solve",
    "solve_drf",
    "trajectory_derivative",
    "usages",
    "utility",
    "validate_instance",
    "verify",
]
