"""
Experiment suites: configuration presets and the runner behind the CLI.
"""

from .config import ExperimentConfig, load_config, validate_config
from .runner import RunResult, run_experiment

__all__ = ["ExperimentConfig", "load_config", "validate_config", "RunResult", "run_experiment"]
