"""Uplink spectral efficiency of cell-free RAN with edge distributed units
under finite blocklength."""
from .errors import (CfranError, ConfigError, DegenerateGeometryError, InfeasibleColoringError,
                     SingularChannelError, UnsupportedConfigurationError)
from .scenario import ScenarioConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "CfranError", "ConfigError", "DegenerateGeometryError", "InfeasibleColoringError",
    "SingularChannelError", "UnsupportedConfigurationError", "ScenarioConfig", "load_config",
    "__version__",
]
