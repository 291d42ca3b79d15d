"""System-level OFDMA downlink simulator with power-aware multi-stream PF scheduling."""

from .config import ConfigError, SystemConfig, parse_config, with_overrides
from .engine import run_drop, run_variants
from .stats import DropStats, Report, aggregate, coverage, jain_index

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "SystemConfig", "parse_config", "with_overrides",
    "run_drop", "run_variants",
    "DropStats", "Report", "aggregate", "coverage", "jain_index",
]
