"""
Networks Module
===============

Transformer units, power normalization, the bundled feedback code model,
statistics freezing and the weight archive format.
"""

from engine.networks.archive import FORMAT_VERSION, WeightArchive, archive_path
from engine.networks.calibration import freeze_stats
from engine.networks.model import FeedbackCodeModel, init_model
from engine.networks.normalization import (
    NormMode,
    PowerNormalizer,
    PowerNormStats,
    batch_statistics,
    power_normalize,
)
from engine.networks.units import DecoderUnit, EncoderUnit, FeatureExtractor, SymbolUnit


__all__ = [
    "FORMAT_VERSION",
    "DecoderUnit",
    "EncoderUnit",
    "FeatureExtractor",
    "FeedbackCodeModel",
    "NormMode",
    "PowerNormStats",
    "PowerNormalizer",
    "SymbolUnit",
    "WeightArchive",
    "archive_path",
    "batch_statistics",
    "freeze_stats",
    "init_model",
    "power_normalize",
]
