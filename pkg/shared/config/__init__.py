"""
Configuration Module
====================

Two layers of configuration:

- Runtime settings (`Settings`) loaded from environment variables / `.env`
  with type validation and defaults.
- Experiment configuration (`ExperimentConfig`) describing the protocol,
  the networks and the training recipe; versioned with every artifact.

Usage:
    from shared.config import settings, default_paper_config, validate

    print(settings.output_dir)
    report = validate(default_paper_config())
"""

from shared.config.experiment import (
    CurriculumSegment,
    ExperimentConfig,
    FeedbackMode,
    LrDecay,
    NetworkSpec,
    NormGranularity,
    NormStd,
    PositionalEncoding,
    ProtocolConfig,
    TrainConfig,
    ValidationReport,
    apply_overrides,
    config_hash,
    default_paper_config,
    desk_scale_config,
    load_experiment,
    save_experiment,
    validate,
)
from shared.config.settings import (
    Environment,
    LogLevel,
    Precision,
    Settings,
    get_settings,
)


# Global settings instance (singleton)
settings = get_settings()

__all__ = [
    "CurriculumSegment",
    "Environment",
    "ExperimentConfig",
    "FeedbackMode",
    "LogLevel",
    "LrDecay",
    "NetworkSpec",
    "NormGranularity",
    "NormStd",
    "PositionalEncoding",
    "Precision",
    "ProtocolConfig",
    "Settings",
    "TrainConfig",
    "ValidationReport",
    "apply_overrides",
    "config_hash",
    "default_paper_config",
    "desk_scale_config",
    "get_settings",
    "load_experiment",
    "save_experiment",
    "settings",
    "validate",
]
