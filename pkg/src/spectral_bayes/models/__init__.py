"""Benchmark likelihoods and the heat-conduction forward model."""

from .benchmarks import (
    BENCHMARKS,
    Benchmark,
    conjugate1d,
    get_benchmark,
    ihcp2d,
    ihcp2d_problem,
    ihcp6d,
    ihcp6d_problem,
    ihcp_benchmark,
    normal2d,
)
from .gaussian import GaussianLikelihoodSpec, normal_known_var_loglike, normal_loglike
from .heat import (
    HeatProblem,
    HeatSolution,
    IHCPLikelihood,
    Rectangle,
    SolverError,
    field_to_csv,
    fit_forward_pce,
    fit_forward_pce_default,
    forward_model,
    forward_pce_predict,
    ihcp_loglike,
    linear_profile,
    make_synthetic_data,
    richardson_order,
    sensor_line,
    solve_heat,
)

__all__ = [
    "BENCHMARKS",
    "Benchmark",
    "GaussianLikelihoodSpec",
    "HeatProblem",
    "HeatSolution",
    "IHCPLikelihood",
    "Rectangle",
    "SolverError",
    "conjugate1d",
    "field_to_csv",
    "fit_forward_pce",
    "fit_forward_pce_default",
    "forward_model",
    "forward_pce_predict",
    "get_benchmark",
    "ihcp2d",
    "ihcp2d_problem",
    "ihcp6d",
    "ihcp6d_problem",
    "ihcp_benchmark",
    "ihcp_loglike",
    "linear_profile",
    "make_synthetic_data",
    "normal2d",
    "normal_known_var_loglike",
    "normal_loglike",
    "richardson_order",
    "sensor_line",
    "solve_heat",
]
