"""Simulation studies, predictive benchmarks and their reports."""

from .config import ConfigError, ExperimentConfig, config_from_json, load_config
from .experiments import (
    EXPERIMENTS,
    ExperimentReport,
    bench_predictive,
    default_test_points,
    replicate_dataset,
    run_bias_experiment,
    run_components_experiment,
    run_coverage_experiment,
)
from .generators import gen_linear, gen_mars, linear_function, mars_function
from .reports import report_csv, report_json, write_report

__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentReport",
    "bench_predictive",
    "config_from_json",
    "default_test_points",
    "gen_linear",
    "gen_mars",
    "linear_function",
    "load_config",
    "mars_function",
    "replicate_dataset",
    "report_csv",
    "report_json",
    "run_bias_experiment",
    "run_components_experiment",
    "run_coverage_experiment",
    "write_report",
]
