"""Config-driven experiment runner and CLI."""
from .cli import cli_main, kpi_table_rows
from .config import ExperimentConfig, SchemaError, config_from_dict, load_config
from .numerology import NumerologyReport, validate_numerology
from .runner import RunManifest, compute_tables, run_experiment

__all__ = ["ExperimentConfig", "NumerologyReport", "RunManifest", "SchemaError", "cli_main",
           "compute_tables", "config_from_dict", "kpi_table_rows", "load_config",
           "run_experiment", "validate_numerology"]
