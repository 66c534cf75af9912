"""
AWGN Channel
============

Forward and feedback AWGN channels, SNR arithmetic and seeded randomness.

All randomness flows through `torch.Generator` objects built from 64-bit
seeds. Per-purpose seeds are derived from one master seed by stable
hashing, and evaluation shards use ``master_seed + shard_index``.

Version: 0.1.0
"""

import hashlib
import math
from dataclasses import dataclass

import torch
from pydantic import BaseModel, ConfigDict, Field

from shared.config.experiment import ProtocolConfig


Rng = torch.Generator

_SEED_MASK = (1 << 63) - 1


def snr_db_to_sigma2(snr_db: float) -> float:
    """Noise variance for a unit-power signal at `snr_db`."""
    return 10 ** (-snr_db / 10)


def make_rng(seed: int, device: str | torch.device = "cpu") -> Rng:
    """Deterministic generator for a 64-bit seed."""
    generator = torch.Generator(device=device)
    generator.manual_seed(seed & 0xFFFF_FFFF_FFFF_FFFF)
    return generator


def derive_seed(seed: int, purpose: str) -> int:
    """Stable per-purpose seed: same (seed, purpose) gives the same value on every platform."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & _SEED_MASK


def shard_seed(master_seed: int, shard_index: int) -> int:
    return master_seed + shard_index


class ChannelParams(BaseModel):
    """AWGN channel noise variance (linear). Zero means noiseless."""

    model_config = ConfigDict(frozen=True)

    sigma2: float = Field(ge=0.0)

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "ChannelParams":
        return cls(sigma2=snr_db_to_sigma2(snr_db))

    @property
    def std(self) -> float:
        return math.sqrt(self.sigma2)


def sample_noise(
    shape: tuple[int, ...],
    params: ChannelParams,
    rng: Rng,
    dtype: torch.dtype = torch.float64,
    device: str | torch.device = "cpu",
) -> torch.Tensor:
    """Draw iid N(0, sigma2) noise. A noiseless channel still consumes no randomness."""
    if params.sigma2 == 0.0:
        return torch.zeros(shape, dtype=dtype, device=device)
    return params.std * torch.randn(shape, generator=rng, dtype=dtype, device=device)


def transmit(c: torch.Tensor, params: ChannelParams, rng: Rng) -> torch.Tensor:
    """
    Pass symbols through an AWGN channel.

    Args:
        c: Transmitted symbols (any shape, finite)
        params: Channel noise variance
        rng: Generator the noise is drawn from

    Returns:
        c + n with n iid N(0, sigma2), same shape as c
    """
    if not torch.isfinite(c).all():
        raise ValueError("transmitted symbols must be finite")
    return c + sample_noise(tuple(c.shape), params, rng, dtype=c.dtype, device=c.device)


@dataclass(frozen=True)
class ChannelPair:
    """Forward (transmitter -> receiver) and feedback (receiver -> transmitter) links."""

    forward: ChannelParams
    feedback: ChannelParams

    @classmethod
    def from_snrs(cls, snr_ff_db: float, snr_fb_db: float) -> "ChannelPair":
        return cls(ChannelParams.from_snr_db(snr_ff_db), ChannelParams.from_snr_db(snr_fb_db))

    @classmethod
    def for_protocol(cls, protocol: ProtocolConfig) -> "ChannelPair":
        return cls.from_snrs(protocol.snr_ff_db, protocol.snr_fb_db)


@dataclass
class NoiseRealization:
    """
    Noise of one batch of episodes, drawn up front.

    forward[t] is n^(t+1) with shape (B, l, w) and feedback[t] is ñ^(t+1),
    where w is the per-block slot width of that round. The symbols never
    influence the noise, so it enters the computation as an additive
    constant and single rounds can be replaced to check causality.
    """

    forward: list[torch.Tensor]
    feedback: list[torch.Tensor]

    @classmethod
    def draw(
        cls,
        protocol: ProtocolConfig,
        channels: ChannelPair,
        batch_size: int,
        rng: Rng,
        dtype: torch.dtype = torch.float64,
        device: str | torch.device = "cpu",
    ) -> "NoiseRealization":
        forward = [
            sample_noise(
                (batch_size, protocol.l, protocol.slot_width(tau)),
                channels.forward,
                rng,
                dtype=dtype,
                device=device,
            )
            for tau in range(1, protocol.T + 1)
        ]
        feedback = [
            sample_noise(
                (batch_size, protocol.l, protocol.slot_width(tau)),
                channels.feedback,
                rng,
                dtype=dtype,
                device=device,
            )
            for tau in range(1, protocol.T)
        ]
        return cls(forward=forward, feedback=feedback)

    def clone(self) -> "NoiseRealization":
        return NoiseRealization(
            forward=[n.clone() for n in self.forward],
            feedback=[n.clone() for n in self.feedback],
        )
