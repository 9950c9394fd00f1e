"""Experiment runner: configs, metrics, named experiments and the CLI."""
from .config import ConfigError, ExperimentConfig, config_from_mapping, load_config, parse_action
from .experiments import (
    EXPERIMENTS, SCALED_BASELINE, Table, build_program, exp_agility, exp_saturation, exp_scalability,
    generate_trace, run, saturation_summary,
)
from .metrics import CSV_MAGIC, MetricsReport, latency_stats, read_csv, summarize, write_csv

__all__ = [
    "CSV_MAGIC", "ConfigError", "EXPERIMENTS", "ExperimentConfig", "MetricsReport", "SCALED_BASELINE",
    "Table", "build_program", "config_from_mapping", "exp_agility", "exp_saturation", "exp_scalability",
    "generate_trace", "latency_stats", "load_config", "parse_action", "read_csv", "run",
    "saturation_summary", "summarize", "write_csv",
]
