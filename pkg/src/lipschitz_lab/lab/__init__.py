"""Experiment configuration, scaling schedules, convergence sweeps and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import (
    COLUMNS,
    ConvergenceReport,
    hausdorff_audit,
    restrict_with_labels,
    run_experiment,
    scaling_schedule,
)

__all__ = [
    "COLUMNS",
    "ConfigError",
    "ConvergenceReport",
    "ExperimentConfig",
    "hausdorff_audit",
    "load_config",
    "parse_config",
    "restrict_with_labels",
    "run_experiment",
    "scaling_schedule",
]
