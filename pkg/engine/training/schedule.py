"""
Curriculum and learning-rate schedules.

Both are pure functions of the batch index, so a resumed run picks up the
exact SNRs and learning rate it would have used without interruption.
"""

from dataclasses import dataclass

from shared.config.experiment import CurriculumSegment, ExperimentConfig, TrainConfig


@dataclass(frozen=True)
class CurriculumSchedule:
    """Piecewise-linear SNR ramps followed by the target SNRs."""

    segments: tuple[CurriculumSegment, ...]
    target_ff_db: float
    target_fb_db: float

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "CurriculumSchedule":
        return cls(
            segments=tuple(config.training.curriculum),
            target_ff_db=config.protocol.snr_ff_db,
            target_fb_db=config.protocol.snr_fb_db,
        )

    @property
    def length(self) -> int:
        return sum(segment.length for segment in self.segments)


def _ramp(start: float | None, end: float | None, target: float, fraction: float) -> float:
    first = target if start is None else start
    last = target if end is None else end
    return first + (last - first) * fraction


def curriculum_snrs(batch_index: int, schedule: CurriculumSchedule) -> tuple[float, float]:
    """
    (forward, feedback) training SNR in dB for a batch.

    Inside a segment of length L the SNR moves linearly in dB, reaching
    start + (end - start)·j/L at position j. Past the last segment both
    SNRs sit at their targets.
    """
    if batch_index < 0:
        raise ValueError(f"batch index must be >= 0 (got {batch_index})")
    offset = 0
    for segment in schedule.segments:
        if batch_index < offset + segment.length:
            fraction = (batch_index - offset) / segment.length
            return (
                _ramp(segment.ff_start_db, segment.ff_end_db, schedule.target_ff_db, fraction),
                _ramp(segment.fb_start_db, segment.fb_end_db, schedule.target_fb_db, fraction),
            )
        offset += segment.length
    return schedule.target_ff_db, schedule.target_fb_db


def lr_at(batch_index: int, config: TrainConfig) -> float:
    """Polynomial decay lr_init·(1 - b/total)^power + lr_final, b clamped to [0, total]."""
    total = config.total_batches
    progress = min(max(batch_index, 0), total) / total
    return config.lr_init * (1.0 - progress) ** config.lr_decay.power + config.lr_decay.lr_final
