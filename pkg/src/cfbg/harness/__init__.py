"""Experiment orchestration: configs, deterministic RNG streams, runners, CLI."""

from .config import ExperimentConfig, validate_config
from .rng import rng_stream
from .experiments import run_experiment

__all__ = ["ExperimentConfig", "validate_config", "rng_stream", "run_experiment"]
