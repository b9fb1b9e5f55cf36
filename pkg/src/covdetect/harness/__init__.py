"""Experiment orchestration: configs, Monte-Carlo campaigns, output files, CLI."""

from .config import ExperimentConfig, load_config
from .experiments import compare, run, simulate_estimates
from .output import ResultRecord, write_record

__all__ = ["ExperimentConfig", "ResultRecord", "compare", "load_config", "run", "simulate_estimates", "write_record"]
