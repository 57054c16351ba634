"""Simulation and stability analysis of multi-terminal HVDC grids."""

from ._core import (
    Config,
    IoError,
    NumericalError,
    SearchRangeError,
    ValidationError,
    critical_delay,
    equilibrium,
    hurwitz,
    laplacian,
    load_preset,
    parse_config,
    parse_config_text,
    preset_names,
    simulate,
    stability,
)

__all__ = [
    "Config",
    "IoError",
    "NumericalError",
    "SearchRangeError",
    "ValidationError",
    "critical_delay",
    "equilibrium",
    "hurwitz",
    "laplacian",
    "load_preset",
    "parse_config",
    "parse_config_text",
    "preset_names",
    "simulate",
    "stability",
]
