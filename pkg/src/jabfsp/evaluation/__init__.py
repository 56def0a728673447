"""Experiment harness: metrics, configuration, Monte Carlo sweeps and the CLI."""
from .config import ConfigError, ExperimentConfig, SystemConfig, load_config, parse_config
from .harness import emit_csv, read_csv, run_sweep, run_trial, run_trials
from .metrics import Metrics, compute_der, compute_ser

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Metrics",
    "SystemConfig",
    "compute_der",
    "compute_ser",
    "emit_csv",
    "load_config",
    "parse_config",
    "read_csv",
    "run_sweep",
    "run_trial",
    "run_trials",
]
