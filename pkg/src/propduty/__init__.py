"""Proportional duty: evaluation, Monte Carlo protocol, verification and decision policy."""

from .duty import (
    BaselineHumility,
    DomainError,
    DutyBreakdown,
    DutyInputs,
    Exponential,
    Linear,
    Logistic,
    conservation_residual,
    effective_humility,
    eval_signal,
    evaluate,
)
from .decision import PolicyThresholds, Recommendation, Scenario, evaluate_scenario, recommend
from .montecarlo import SimulationConfig, SimulationSummary, run_protocol, sample_trials, summarize
from .stats import pearson
from .verification import Zone, classify_zone, run_ranking_suite

__version__ = "0.1.0"

__all__ = [
    "BaselineHumility", "DomainError", "DutyBreakdown", "DutyInputs", "Exponential", "Linear",
    "Logistic", "PolicyThresholds", "Recommendation", "Scenario", "SimulationConfig",
    "SimulationSummary", "Zone", "classify_zone", "conservation_residual", "effective_humility",
    "eval_signal", "evaluate", "evaluate_scenario", "pearson", "recommend", "run_protocol",
    "run_ranking_suite", "sample_trials", "summarize",
]
