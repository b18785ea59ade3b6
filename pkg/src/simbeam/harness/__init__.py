"""Experiment configuration, seeded sweeps, CSV export and the command line."""

from .config import ConfigError, ExperimentConfig, load_config
from .experiment import export_traces, run_experiment, trial_seed, write_results
