"""
Settings Module
===============

Pydantic-based runtime configuration with environment variable loading.

Experiment parameters (protocol, architecture, optimizer) do not live here;
they are versioned with every checkpoint and result, see
``shared.config.experiment``. This module only holds what varies between
machines and invocations.

Version: 0.1.0
"""

import re
from enum import Enum
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


_DEVICE = re.compile(r"cpu|mps|cuda(:\d+)?")


class Environment(str, Enum):
    """Deployment environment."""

    DEVELOPMENT = "development"
    TESTING = "testing"
    PRODUCTION = "production"


class LogLevel(str, Enum):
    """Logging levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Precision(str, Enum):
    """Floating point precision for simulation and training."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"


class EvaluationSettings(BaseSettings):
    """Monte-Carlo evaluation defaults."""

    model_config = SettingsConfigDict(env_prefix="FBENGINE_EVAL_")

    batch_size: int = Field(default=10_000, ge=1)
    max_trials: int = Field(default=100_000_000, ge=1)
    min_errors: int = Field(default=100, ge=1)
    shards: int = Field(default=1, ge=1)
    precision: Precision = Precision.FLOAT64


class Settings(BaseSettings):
    """
    Main application settings.

    Loads configuration from environment variables with sensible defaults.
    Use the global `settings` singleton or call `get_settings()`.
    """

    model_config = SettingsConfigDict(
        env_prefix="FBENGINE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # General
    environment: Environment = Environment.DEVELOPMENT
    log_level: LogLevel = LogLevel.INFO
    json_logs: bool = False

    # Where every subcommand writes unless told otherwise
    output_dir: Path = Path("runs")

    # Torch device for training and evaluation
    device: str = "cpu"

    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)

    @field_validator("log_level", mode="before")
    @classmethod
    def uppercase_log_level(cls, v: str | LogLevel) -> LogLevel:
        """Ensure log level is uppercase."""
        if isinstance(v, str):
            return LogLevel(v.upper())
        return v

    @field_validator("device")
    @classmethod
    def known_device(cls, v: str) -> str:
        """Accept cpu, mps, cuda or cuda:<index>."""
        if not _DEVICE.fullmatch(v):
            raise ValueError(f"unsupported device {v!r} (expected cpu, mps, cuda or cuda:<n>)")
        return v

    @property
    def json_output(self) -> bool:
        """JSON log lines when asked for or when running in production."""
        return self.json_logs or self.environment == Environment.PRODUCTION


@lru_cache
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Returns:
        Settings: Application settings singleton.
    """
    return Settings()
