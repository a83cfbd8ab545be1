"""Continuous goal-directed actions: generalize demonstrations into feature-space
goals, recognize executions with DTW, and execute with evolutionary strategies
in simulated paint and iron worlds."""

from .errors import CGDAError
from .evolution import EvolutionConfig
from .model import Demonstration, FeatureTrajectory, ObservedTrajectory, compute_goal_count, generalize
from .recognition import discrepancy, dtw_cost, goal_discrepancy
from .scenario import Scenario, generate_demonstrations
from .strategies import ExecutionReport, StrategyConfig, localize, run_strategy

__all__ = [
    "CGDAError",
    "Demonstration",
    "EvolutionConfig",
    "ExecutionReport",
    "FeatureTrajectory",
    "ObservedTrajectory",
    "Scenario",
    "StrategyConfig",
    "compute_goal_count",
    "discrepancy",
    "dtw_cost",
    "generalize",
    "generate_demonstrations",
    "goal_discrepancy",
    "localize",
    "run_strategy",
]
__version__ = "0.1.0"
