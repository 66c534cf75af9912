"""
Power Normalization
===================

Maps raw network outputs to zero-mean, unit-variance symbols so every
transmitted block meets the average power constraint.

Statistics are kept per (round, block) position, or per round when the
architecture asks for round granularity. During training they come from
the current batch and gradients flow through them; for evaluation they are
computed once on a calibration batch and frozen.

Version: 0.1.0
"""

from dataclasses import dataclass
from enum import Enum

import torch
from torch import nn

from shared.config.experiment import NormGranularity, NormStd


class NormMode(str, Enum):
    """Where the normalization statistics come from."""

    TRAIN = "train"  # batch statistics, differentiable
    FROZEN = "frozen"  # stored statistics
    CALIBRATE = "calibrate"  # batch statistics, recorded into the buffers


@dataclass(frozen=True)
class PowerNormStats:
    """Snapshot of per-position statistics, shapes (rounds, l)."""

    mean: torch.Tensor
    std: torch.Tensor
    frozen: bool

    @property
    def rounds(self) -> int:
        return int(self.mean.shape[0])

    def summary(self) -> dict[str, float | bool | list[int]]:
        """Scalar overview used by manifests and `inspect`."""
        if self.mean.numel() == 0:
            return {"frozen": self.frozen, "shape": list(self.mean.shape)}
        return {
            "frozen": self.frozen,
            "shape": list(self.mean.shape),
            "mean_abs_max": float(self.mean.abs().max()),
            "std_min": float(self.std.min()),
            "std_max": float(self.std.max()),
        }


def batch_statistics(
    raw: torch.Tensor,
    granularity: NormGranularity = NormGranularity.POSITION,
    std_kind: NormStd = NormStd.POPULATION,
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Mean and standard deviation of one round of raw symbols.

    Args:
        raw: (B, l) raw symbols of one round
        granularity: Per block position or pooled over the round
        std_kind: Population (divide by B) or sample (divide by B-1) std

    Returns:
        (mean, std), each of shape (l,)

    Raises:
        ValueError: If the batch holds fewer than 2 messages
        FloatingPointError: If any position has zero variance
    """
    if raw.dim() != 2:
        raise ValueError(f"expected raw symbols of shape (B, l), got {tuple(raw.shape)}")
    if raw.shape[0] < 2:
        raise ValueError(f"batch statistics need a batch of at least 2 (got {raw.shape[0]})")

    correction = 0 if std_kind == NormStd.POPULATION else 1
    if granularity == NormGranularity.ROUND:
        mean = raw.mean().expand(raw.shape[1])
        std = raw.std(correction=correction).expand(raw.shape[1])
    else:
        mean = raw.mean(dim=0)
        std = raw.std(dim=0, correction=correction)

    if bool((std == 0).any()):
        raise FloatingPointError("zero variance in power normalization batch")
    return mean, std


def power_normalize(
    raw: torch.Tensor,
    stats: PowerNormStats,
    tau: int,
    mode: NormMode,
    granularity: NormGranularity = NormGranularity.POSITION,
    std_kind: NormStd = NormStd.POPULATION,
) -> torch.Tensor:
    """
    Normalize round `tau` (1-based) of raw symbols.

    Train and calibrate modes use the batch statistics; frozen mode reads
    `stats` and requires them to be frozen.
    """
    if not 1 <= tau <= stats.rounds:
        raise ValueError(f"round {tau} outside [1, {stats.rounds}]")
    if mode == NormMode.FROZEN:
        if not stats.frozen:
            raise ValueError("power normalization statistics are not frozen")
        mean = stats.mean[tau - 1].to(raw.dtype)
        std = stats.std[tau - 1].to(raw.dtype)
    else:
        mean, std = batch_statistics(raw, granularity, std_kind)
    return (raw - mean) / std


class PowerNormalizer(nn.Module):
    """
    Power normalization with (rounds, l) statistic buffers.

    The buffers are part of the state dict, so they travel with weight
    archives and checkpoints.
    """

    mean: torch.Tensor
    std: torch.Tensor
    frozen_flag: torch.Tensor

    def __init__(
        self,
        rounds: int,
        n_blocks: int,
        granularity: NormGranularity = NormGranularity.POSITION,
        std_kind: NormStd = NormStd.POPULATION,
    ) -> None:
        super().__init__()
        self.granularity = granularity
        self.std_kind = std_kind
        self.register_buffer("mean", torch.zeros(rounds, n_blocks))
        self.register_buffer("std", torch.ones(rounds, n_blocks))
        self.register_buffer("frozen_flag", torch.tensor(False))

    @property
    def frozen(self) -> bool:
        return bool(self.frozen_flag)

    @property
    def rounds(self) -> int:
        return int(self.mean.shape[0])

    def stats(self) -> PowerNormStats:
        return PowerNormStats(
            mean=self.mean.detach().clone(),
            std=self.std.detach().clone(),
            frozen=self.frozen,
        )

    def mark_frozen(self) -> None:
        self.frozen_flag.fill_(True)

    def unfreeze(self) -> None:
        self.frozen_flag.fill_(False)

    def forward(self, raw: torch.Tensor, tau: int, mode: NormMode) -> torch.Tensor:
        if not 1 <= tau <= self.rounds:
            raise ValueError(f"round {tau} outside [1, {self.rounds}]")

        if mode == NormMode.FROZEN:
            if not self.frozen:
                raise ValueError("power normalization statistics are not frozen")
            return (raw - self.mean[tau - 1].to(raw.dtype)) / self.std[tau - 1].to(raw.dtype)

        mean, std = batch_statistics(raw, self.granularity, self.std_kind)
        if mode == NormMode.CALIBRATE:
            with torch.no_grad():
                self.mean[tau - 1] = mean.detach().to(self.mean.dtype)
                self.std[tau - 1] = std.detach().to(self.std.dtype)
        return (raw - mean) / std
