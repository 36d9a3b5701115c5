"""Experiment harness: configuration, orchestration and command line."""

from .config import ExperimentConfig, load_config, parse_config
from .experiment import build_system, dump_operators, generate_data, run_experiment

__all__ = ["ExperimentConfig", "build_system", "dump_operators", "generate_data",
           "load_config", "parse_config", "run_experiment", "bundled_config"]


def bundled_config(name="section4.cfg"):
    """Path of a configuration file shipped with the package."""
    from importlib.resources import files
    return str(files(__name__) / "configs" / name)
