"""Experiment harness: config loading, sweeps, CSV and SVG output."""
from .config import ExperimentConfig, ObserverConfig, PlannerConfig, Threshold, load_config, validate_experiment
from .plot import render_plot, svg_plot
from .results import read_results, rows_to_csv, write_results
from .runner import COLUMNS, ResultRow, run_experiment

__all__ = [
    "COLUMNS", "ExperimentConfig", "ObserverConfig", "PlannerConfig", "ResultRow", "Threshold", "load_config",
    "read_results", "render_plot", "rows_to_csv", "run_experiment", "svg_plot", "validate_experiment",
    "write_results",
]
