"""Configuration, experiment runners and command line."""
from .config import ConfigError, LabConfig, load_config, schema_text
from .experiments import CATALOGUE, ExperimentReport, run_experiment

__all__ = ["CATALOGUE", "ConfigError", "ExperimentReport", "LabConfig", "load_config",
           "run_experiment", "schema_text"]
