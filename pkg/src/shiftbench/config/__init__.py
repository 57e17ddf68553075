"""Configuration package for shiftbench"""

from .settings import (
    ShiftBenchConfig,
    EstimatorSettings,
    CalibrationSettings,
    get_config,
    set_config,
    reload_config,
)

__all__ = [
    "ShiftBenchConfig",
    "EstimatorSettings",
    "CalibrationSettings",
    "get_config",
    "set_config",
    "reload_config",
]
