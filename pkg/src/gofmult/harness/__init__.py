"""Command-line front end and Monte Carlo experiment runner."""

from .checks import GradientCheckReport, TimingReport, run_gradient_check, run_timing
from .csvio import CsvParseError, read_csv
from .experiment import Cell, ExperimentConfig, ExperimentReport, run_experiment
from .single import run_single

__all__ = [
    "Cell",
    "CsvParseError",
    "ExperimentConfig",
    "ExperimentReport",
    "GradientCheckReport",
    "TimingReport",
    "read_csv",
    "run_experiment",
    "run_gradient_check",
    "run_single",
    "run_timing",
]
