"""
Block Feedback Protocol
=======================

Knowledge held by the transmitter and the receiver across communication
blocks, the fixed-width row layouts fed to the networks, passive and
systematic feedback, and channel-use accounting.

Row layouts (per bit-block i, histories left-aligned, zero-padded right):

    transmitter  [ b̄_i | c_i^(1..τ-1) pad T-1 | ỹ_i^(1..τ-1) pad T-1 ]
    receiver     [ y_i^(1..τ) pad T | c̃_i^(1..τ-1) pad T-1 ]

The receiver layout is shared by the feedback network and the decoder.
The transmitter uses only c^(1..τ-1): the parity network cannot consume the
symbol it is about to produce. In systematic_first mode the round-1 slot of
every history is m symbols wide instead of one.

All states are batched: tensors carry a leading batch dimension and a
single message is a batch of one.

Version: 0.1.0
"""

import math
from dataclasses import dataclass, field

import torch

from shared.config.experiment import ProtocolConfig


def bpsk(bits: torch.Tensor) -> torch.Tensor:
    """Map bits {0, 1} to symbols {-1, +1}."""
    return 2 * bits - 1


def compute_alpha(sigma2_ff: float) -> float:
    """
    Relay gain keeping E[(alpha·y)^2] = 1 for unit-power forward symbols.

    Raises:
        ValueError: If the noise variance is negative
    """
    if sigma2_ff < 0:
        raise ValueError(f"noise variance must be >= 0 (got {sigma2_ff})")
    return 1.0 / math.sqrt(1.0 + sigma2_ff)


def passive_feedback(y: torch.Tensor, alpha: float) -> torch.Tensor:
    """Relay the received forward block, scaled by alpha."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0 (got {alpha})")
    return alpha * y


def systematic_first_block(bits: torch.Tensor) -> torch.Tensor:
    """
    First forward block of systematic feedback: the BPSK image of the bits.

    Args:
        bits: (..., K) or (..., l, m) bits

    Returns:
        ±1 symbols of the same shape. The receiver relays them back with
        `passive_feedback(y, compute_alpha(sigma2_ff))`.
    """
    return bpsk(bits)


@dataclass(frozen=True)
class ChannelAccounting:
    """Channel uses of one message."""

    N: int
    N_fb: int
    direction_changes: int


def accounting(config: ProtocolConfig) -> ChannelAccounting:
    """Forward uses, feedback uses and direction changes of the protocol."""
    return ChannelAccounting(
        N=config.N,
        N_fb=config.N_fb,
        direction_changes=config.direction_changes,
    )


def _pad_history(
    history: list[torch.Tensor],
    n_slots: int,
    protocol: ProtocolConfig,
    like: torch.Tensor,
) -> torch.Tensor:
    """Concatenate per-round blocks into n_slots fixed-width slots, zero-filling the rest."""
    batch, blocks = like.shape[0], like.shape[1]
    parts = [h.to(like.dtype) for h in history[:n_slots]]
    for tau in range(len(parts) + 1, n_slots + 1):
        parts.append(like.new_zeros(batch, blocks, protocol.slot_width(tau)))
    if not parts:
        return like.new_zeros(batch, blocks, 0)
    return torch.cat(parts, dim=-1)


@dataclass
class TransmitterState:
    """
    Transmitter knowledge q^(τ), partitioned per bit-block.

    sent_parity[t] and received_feedback[t] hold round t+1, each of shape
    (B, l, w). `tau` is the round the transmitter is about to encode.
    """

    protocol: ProtocolConfig
    bit_blocks: torch.Tensor
    sent_parity: list[torch.Tensor] = field(default_factory=list)
    received_feedback: list[torch.Tensor] = field(default_factory=list)
    tau: int = 1
    dtype: torch.dtype = torch.float32

    @classmethod
    def start(
        cls,
        bits: torch.Tensor,
        protocol: ProtocolConfig,
        dtype: torch.dtype | None = None,
    ) -> "TransmitterState":
        """Initial state for a batch of K-bit messages, shape (B, K)."""
        if bits.shape[-1] != protocol.K:
            raise ValueError(f"expected {protocol.K} bits per message, got {bits.shape[-1]}")
        if dtype is None:
            dtype = bits.dtype if bits.is_floating_point() else torch.get_default_dtype()
        return cls(
            protocol=protocol,
            bit_blocks=bits.reshape(bits.shape[0], protocol.l, protocol.m),
            dtype=dtype,
        )

    def check(self) -> None:
        if not 1 <= self.tau <= self.protocol.T:
            raise ValueError(f"tau={self.tau} outside [1, {self.protocol.T}]")
        if len(self.sent_parity) != self.tau - 1 or len(self.received_feedback) != self.tau - 1:
            raise ValueError(
                f"inconsistent transmitter history at tau={self.tau}: "
                f"{len(self.sent_parity)} parity, {len(self.received_feedback)} feedback blocks"
            )

    def record_parity(self, c: torch.Tensor) -> None:
        self.sent_parity.append(c)

    def record_feedback(self, y_fb: torch.Tensor) -> None:
        """Store the observed feedback block and move to the next round."""
        self.received_feedback.append(y_fb)
        self.tau += 1


@dataclass
class ReceiverState:
    """
    Receiver knowledge q̃^(τ), partitioned per bit-block.

    received_forward[t] is y^(t+1) and sent_feedback[t] is c̃^(t+1).
    """

    protocol: ProtocolConfig
    received_forward: list[torch.Tensor] = field(default_factory=list)
    sent_feedback: list[torch.Tensor] = field(default_factory=list)
    tau: int = 1

    def check(self) -> None:
        if len(self.received_forward) not in (self.tau - 1, self.tau):
            raise ValueError(
                f"receiver holds {len(self.received_forward)} forward blocks at tau={self.tau}"
            )
        if len(self.sent_feedback) != self.tau - 1:
            raise ValueError(
                f"receiver sent {len(self.sent_feedback)} feedback blocks at tau={self.tau}"
            )

    @property
    def complete(self) -> bool:
        """All T forward blocks received and T-1 feedback blocks sent."""
        return (
            len(self.received_forward) == self.protocol.T
            and len(self.sent_feedback) == self.protocol.T - 1
        )

    def record_forward(self, y: torch.Tensor) -> None:
        self.received_forward.append(y)

    def record_feedback(self, c_fb: torch.Tensor) -> None:
        """Store the sent feedback block and move to the next round."""
        self.sent_feedback.append(c_fb)
        self.tau += 1


def tx_knowledge_rows(state: TransmitterState, T: int) -> torch.Tensor:  # noqa: N803
    """
    Transmitter rows for the parity network.

    Returns:
        (B, l, m + 2(T-1)) tensor, one row per bit-block
    """
    state.check()
    bits = bpsk(state.bit_blocks.to(state.dtype))
    parity = _pad_history(state.sent_parity, T - 1, state.protocol, bits)
    feedback = _pad_history(state.received_feedback, T - 1, state.protocol, bits)
    return torch.cat([bits, parity, feedback], dim=-1)


def rx_knowledge_rows(state: ReceiverState, T: int) -> torch.Tensor:  # noqa: N803
    """
    Receiver rows for the feedback network and the decoder.

    The receiver acts after receiving forward block τ, so y^(τ) must
    already be recorded.

    Returns:
        (B, l, 2T-1) tensor, one row per bit-block
    """
    state.check()
    if len(state.received_forward) != state.tau:
        raise ValueError(f"receiver has not received forward block {state.tau} yet")
    like = state.received_forward[0]
    forward = _pad_history(state.received_forward, T, state.protocol, like)
    feedback = _pad_history(state.sent_feedback, T - 1, state.protocol, like)
    return torch.cat([forward, feedback], dim=-1)
