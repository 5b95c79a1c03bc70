"""Fuel-cell/battery power-split MPC (C++ core)."""

from ._core import (
    NUM_CONSTRAINT_ROWS,
    NUM_INPUTS,
    NUM_STATES,
    ConfigError,
    Plant,
    PlantError,
    config_keys,
    constraints_json,
    default_config_text,
    normalize_config,
    run_cli,
    selfcheck,
    simulate,
    sweep,
)

__all__ = [
    "NUM_CONSTRAINT_ROWS",
    "NUM_INPUTS",
    "NUM_STATES",
    "ConfigError",
    "Plant",
    "PlantError",
    "config_keys",
    "constraints_json",
    "default_config_text",
    "normalize_config",
    "run_cli",
    "selfcheck",
    "simulate",
    "sweep",
]

__version__ = "0.1.0"
