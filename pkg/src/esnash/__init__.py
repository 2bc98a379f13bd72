"""Oscillation-free extremum-seeking Nash equilibrium seeking for N-player games."""

from esnash.errors import (
    DivergenceError,
    InvalidArgumentError,
    NumericalDomainError,
    PlantSolveError,
)
from esnash.game import (
    EXAMPLE_NASH,
    EquilibriumMapResult,
    GameModel,
    builtin_example,
    equilibrium_map,
    eval_dynamics,
    eval_payoffs,
    polynomial_game,
    reduced_payoff,
)
from esnash.controller import (
    FrequencyReport,
    SeekerParams,
    SeekerState,
    action,
    classical_es_derivatives,
    seeker_derivatives,
    validate_frequencies,
)
from esnash.sim import SimConfig, Trajectory, closed_loop_derivatives, rk4_step, simulate
from esnash.analysis import (
    IntegralReport,
    RunMetrics,
    StabilityReport,
    check_assumption4,
    compute_metrics,
    delta_matrix,
    nash_residual,
    stability_report,
    verify_averaging_integrals,
)
from esnash.config import ConfigError, RunConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "EXAMPLE_NASH",
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "DivergenceError",
    "EquilibriumMapResult",
    "FrequencyReport",
    "GameModel",
    "IntegralReport",
    "InvalidArgumentError",
    "NumericalDomainError",
    "PlantSolveError",
    "RunMetrics",
    "SeekerParams",
    "SeekerState",
    "SimConfig",
    "StabilityReport",
    "Trajectory",
    "action",
    "builtin_example",
    "check_assumption4",
    "classical_es_derivatives",
    "closed_loop_derivatives",
    "compute_metrics",
    "delta_matrix",
    "equilibrium_map",
    "eval_dynamics",
    "eval_payoffs",
    "nash_residual",
    "polynomial_game",
    "reduced_payoff",
    "rk4_step",
    "seeker_derivatives",
    "simulate",
    "stability_report",
    "validate_frequencies",
    "verify_averaging_integrals",
]
