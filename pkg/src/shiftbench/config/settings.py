"""
Configuration management for shiftbench

This module provides configuration with environment variable support,
validation, and type safety using Pydantic. Estimator and calibration
defaults live here so the CLI and the benchmark harness agree on them.
"""

from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
import yaml


class EstimatorSettings(BaseSettings):
    """Defaults for the label shift estimators"""

    em_tol: float = Field(
        default=1e-8, gt=0, description="EM stopping tolerance (L1 change)"
    )
    em_max_iter: int = Field(default=10_000, ge=1, description="EM iteration cap")
    tau_recall_floor: float = Field(
        default=0.3,
        ge=0,
        le=1,
        description="Below this minimum recall, tau selection uses mean recall",
    )
    rlls_alpha: float = Field(default=0.01, ge=0, description="RLLS alpha")
    rlls_delta: float = Field(default=0.05, gt=0, lt=1, description="RLLS delta")
    simplex_ingest_tol: float = Field(
        default=1e-6,
        gt=0,
        description="Sum deviation silently renormalised on ingestion",
    )

    model_config = SettingsConfigDict(
        env_prefix="SHIFTBENCH_ESTIMATOR_", case_sensitive=False
    )


class CalibrationSettings(BaseSettings):
    """Calibrator fitting and diagnostics configuration"""

    ece_bins: int = Field(default=15, ge=1, description="Bins for ECE diagnostics")
    max_iter: int = Field(
        default=10_000, ge=1, description="Optimizer iteration cap when fitting"
    )
    grad_tol: float = Field(
        default=1e-7, gt=0, description="Gradient infinity-norm convergence bound"
    )

    model_config = SettingsConfigDict(
        env_prefix="SHIFTBENCH_CALIBRATION_", case_sensitive=False
    )


class ShiftBenchConfig(BaseSettings):
    """Main configuration class for shiftbench"""

    log_level: str = Field(default="INFO", description="Logging level")

    # Environment
    environment: str = Field(
        default="development",
        description="Environment: development (rich logs) or production (JSON logs)",
    )

    # Reproducibility and parallelism
    seed: int = Field(default=0, ge=0, description="Base seed for all random draws")
    jobs: int = Field(default=1, ge=1, description="Benchmark cell parallelism")

    # Sub-configurations
    estimators: EstimatorSettings = Field(default_factory=EstimatorSettings)
    calibration: CalibrationSettings = Field(default_factory=CalibrationSettings)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f'log_level must be one of: {", ".join(valid_levels)}')
        return v.upper()

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        valid_envs = ["development", "production"]
        if v.lower() not in valid_envs:
            raise ValueError(f'environment must be one of: {", ".join(valid_envs)}')
        return v.lower()

    model_config = SettingsConfigDict(
        env_prefix="SHIFTBENCH_", case_sensitive=False, env_nested_delimiter="__"
    )

    @classmethod
    def from_yaml(cls, config_path: Path) -> "ShiftBenchConfig":
        """Load configuration from YAML file"""
        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(config_path, "r") as f:
            config_data = yaml.safe_load(f) or {}

        return cls(**config_data)

    @classmethod
    def from_env(cls) -> "ShiftBenchConfig":
        """Load configuration from environment variables"""
        return cls()

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary"""
        return self.model_dump()

    def is_production(self) -> bool:
        """Check if running in production environment"""
        return self.environment == "production"

    def is_development(self) -> bool:
        """Check if running in development environment"""
        return self.environment == "development"


# Global configuration instance
_config: Optional[ShiftBenchConfig] = None


def get_config() -> ShiftBenchConfig:
    """Get the global configuration instance"""
    global _config
    if _config is None:
        _config = ShiftBenchConfig.from_env()
    return _config


def set_config(config: ShiftBenchConfig) -> None:
    """Set the global configuration instance"""
    global _config
    _config = config


def reload_config() -> ShiftBenchConfig:
    """Reload configuration from environment"""
    global _config
    _config = ShiftBenchConfig.from_env()
    return _config
