"""Experiment grid runner and report generation."""

from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .report import (CellResult, RunReport, compute_totals, emit_reports,
                     select_best_rows)
from .runner import run_grid

__all__ = [
    "CellResult", "ConfigError", "ExperimentConfig", "RunReport", "compute_totals",
    "config_from_dict", "emit_reports", "load_config", "run_grid", "select_best_rows",
]
