"""Simulation and estimation of intercurrent-event estimands."""

from ._icepath import (
    NumericalError,
    ValidationError,
    adjustment_plan,
    check_exchangeability,
    d_separated,
    estimate,
    estimator_names,
    generate_single_period,
    generate_trial,
    rubins_pool,
    run_study,
    scenario_graph,
    true_effect,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "adjustment_plan",
    "check_exchangeability",
    "d_separated",
    "estimate",
    "estimator_names",
    "generate_single_period",
    "generate_trial",
    "rubins_pool",
    "run_study",
    "scenario_graph",
    "true_effect",
]
