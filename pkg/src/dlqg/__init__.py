"""Optimal control for three players sharing measurements with delays."""

from .errors import DimensionError, NumericalError, ValidationError
from .evaluation import CostReport, compare, expected_cost
from .filtering import filter_pass
from .model import InformationPattern, ProblemSpec, load_problem, benchmark_problem, random_problem, validate
from .riccati import riccati_backward
from .runtime import build_policy, simulate, simulate_costs
from .synthesis import assemble_qp, dense_qp_oracle, solve_gains

__all__ = [
    "CostReport", "DimensionError", "InformationPattern", "NumericalError", "ProblemSpec", "ValidationError",
    "assemble_qp", "build_policy", "compare", "dense_qp_oracle", "expected_cost", "filter_pass",
    "load_problem", "benchmark_problem", "random_problem", "riccati_backward", "simulate", "simulate_costs",
    "solve_gains", "validate",
]
