"""
Training Module
===============

Curriculum training of the feedback code: loss, schedules, single steps,
the resumable training loop and its checkpoints.
"""

from engine.training.checkpoint import (
    TrainState,
    checkpoint_name,
    load_checkpoint,
    prune_checkpoints,
    save_checkpoint,
)
from engine.training.loss import cross_entropy_loss
from engine.training.schedule import CurriculumSchedule, curriculum_snrs, lr_at
from engine.training.trainer import (
    METRICS_COLUMNS,
    StepResult,
    Trainer,
    TrainResult,
    build_optimizer,
    model_dtype,
    train_loop,
    train_step,
)


__all__ = [
    "METRICS_COLUMNS",
    "CurriculumSchedule",
    "StepResult",
    "TrainResult",
    "TrainState",
    "Trainer",
    "build_optimizer",
    "checkpoint_name",
    "cross_entropy_loss",
    "curriculum_snrs",
    "load_checkpoint",
    "lr_at",
    "model_dtype",
    "prune_checkpoints",
    "save_checkpoint",
    "train_loop",
    "train_step",
]
