"""Experiment orchestration: configuration, evaluation, sweeps, reports and the CLI."""

from .config import ExperimentConfig, load_config
from .experiments import (ParetoPoint, dominates, horizon_rows, pareto_front, run_evaluation,
                          run_horizon_study, run_pareto_sweep, select_closest)
from .report import emit_report

__all__ = ["ExperimentConfig", "ParetoPoint", "dominates", "emit_report", "horizon_rows",
           "load_config", "pareto_front", "run_evaluation", "run_horizon_study",
           "run_pareto_sweep", "select_closest"]
