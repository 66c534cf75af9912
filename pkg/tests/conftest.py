"""
Test Configuration
==================

Pytest fixtures for feedback-engine tests.
"""

import os

import pytest
import torch


# Set test environment
os.environ["FBENGINE_ENVIRONMENT"] = "testing"
os.environ.setdefault("FBENGINE_OUTPUT_DIR", "runs-test")

from engine.channel import make_rng  # noqa: E402
from engine.networks import FeedbackCodeModel, freeze_stats, init_model  # noqa: E402
from shared.config.experiment import (  # noqa: E402
    CurriculumSegment,
    ExperimentConfig,
    FeedbackMode,
    NetworkSpec,
    ProtocolConfig,
    TrainConfig,
)


def tiny_config(
    feedback_mode: FeedbackMode = FeedbackMode.ACTIVE,
    T: int = 3,  # noqa: N803
    m: int = 2,
    l: int = 2,  # noqa: E741
    d_model: int = 8,
    n_heads: int = 2,
    layers: int = 1,
    batch_size: int = 16,
    total_batches: int = 4,
    checkpoint_interval: int = 2,
    snr_ff_db: float = 2.0,
    snr_fb_db: float = 20.0,
) -> ExperimentConfig:
    """Smallest useful experiment: a few blocks, one layer per unit."""
    K = l * m  # noqa: N806
    rate = K / (T * l) if feedback_mode != FeedbackMode.SYSTEMATIC_FIRST else K / (K + (T - 1) * l)
    return ExperimentConfig(
        protocol=ProtocolConfig(
            K=K,
            m=m,
            l=l,
            T=T,
            R=rate,
            snr_ff_db=snr_ff_db,
            snr_fb_db=snr_fb_db,
            feedback_mode=feedback_mode,
        ),
        network=NetworkSpec(
            d_model=d_model,
            n_heads=n_heads,
            d_ffn=2 * d_model,
            n_layers_parity=layers,
            n_layers_feedback=layers,
            n_layers_decoder=layers,
        ),
        training=TrainConfig(
            batch_size=batch_size,
            total_batches=total_batches,
            curriculum=[CurriculumSegment(length=1, ff_start_db=3.0)],
            checkpoint_interval=checkpoint_interval,
            calibration_batch_size=256,
        ),
    )


@pytest.fixture
def tiny() -> ExperimentConfig:
    """Tiny active-feedback config (K=4, l=2, m=2, T=3)."""
    return tiny_config()


@pytest.fixture
def tiny_model(tiny: ExperimentConfig) -> FeedbackCodeModel:
    """Freshly initialized float64 model for the tiny config."""
    return init_model(tiny, seed=7, dtype=torch.float64)


@pytest.fixture
def frozen_model(tiny_model: FeedbackCodeModel) -> FeedbackCodeModel:
    """Tiny model with calibrated, frozen power statistics."""
    return freeze_stats(tiny_model, 256, make_rng(11))


@pytest.fixture
def rng() -> torch.Generator:
    """Seeded generator."""
    return make_rng(1234)
