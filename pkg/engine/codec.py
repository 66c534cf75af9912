"""
Feedback Codec
==============

Iterative parity symbol encoding (IPSE) and joint parity symbol decoding
(JPSD) over a forward/feedback channel pair.

One episode for a batch of messages:

    round τ = 1..T
        transmitter  rows_tx ─ parity net ─ power norm ─> c^(τ) ──(+n)──> y^(τ)
        receiver     (τ < T) rows_rx ─ feedback net ─ power norm ─> c̃^(τ) ──(+ñ)──> ỹ^(τ)
    after round T
        receiver     rows_rx ─ decoder ─ softmax ─ argmax ─> b̂

Passive feedback replaces the feedback network by the relay α·y. In
systematic_first mode round 1 sends the BPSK image of the bits and the
receiver relays it, later rounds run as in active mode.

Noise is drawn up front as a `NoiseRealization`, so an episode is a
deterministic function of (bits, weights, noise).

Version: 0.1.0
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import orjson
import torch

from engine.channel import ChannelPair, NoiseRealization, Rng
from engine.networks.model import FeedbackCodeModel
from engine.networks.normalization import NormMode
from engine.protocol import (
    ChannelAccounting,
    ReceiverState,
    TransmitterState,
    compute_alpha,
    passive_feedback,
    rx_knowledge_rows,
    systematic_first_block,
    tx_knowledge_rows,
)
from shared.config.experiment import FeedbackMode
from shared.logging import get_logger


logger = get_logger(__name__)


# =============================================================================
# Bit / label conversion
# =============================================================================


def index_to_bits(p: int, m: int) -> list[int]:
    """Message index p in [0, 2^m) to m bits, most significant first."""
    if m < 1:
        raise ValueError(f"m must be >= 1 (got {m})")
    if not 0 <= p < 2**m:
        raise ValueError(f"index {p} out of range [0, {2**m})")
    return [(p >> (m - 1 - j)) & 1 for j in range(m)]


def bits_to_index(block: Sequence[int]) -> int:
    """Inverse of `index_to_bits`."""
    index = 0
    for bit in block:
        if bit not in (0, 1):
            raise ValueError(f"bits must be 0 or 1 (got {bit})")
        index = (index << 1) | int(bit)
    return index


def _bit_weights(m: int, device: torch.device) -> torch.Tensor:
    return 2 ** torch.arange(m - 1, -1, -1, device=device)


def labels_from_bits(bits: torch.Tensor, m: int) -> torch.Tensor:
    """(B, K) or (B, l, m) bits -> (B, l) class labels, MSB first."""
    blocks = bits.reshape(bits.shape[0], -1, m).long()
    return (blocks * _bit_weights(m, bits.device)).sum(dim=-1)


def bits_from_labels(labels: torch.Tensor, m: int) -> torch.Tensor:
    """(B, l) class labels -> (B, l, m) bits."""
    if bool((labels < 0).any()) or bool((labels >= 2**m).any()):
        raise ValueError(f"labels must lie in [0, {2**m})")
    shifts = torch.arange(m - 1, -1, -1, device=labels.device)
    return (labels.unsqueeze(-1) >> shifts) & 1


def random_messages(batch_size: int, K: int, rng: Rng) -> torch.Tensor:  # noqa: N803
    """Uniform random messages, shape (batch_size, K), values {0, 1}."""
    return torch.randint(0, 2, (batch_size, K), generator=rng, device=rng.device)


# =============================================================================
# Episode
# =============================================================================


@dataclass
class DecodeResult:
    """Decoder output for a batch: (B, l, 2^m) scores, (B, l) labels, (B, K) bits."""

    logits: torch.Tensor
    probabilities: torch.Tensor
    labels: torch.Tensor
    bits: torch.Tensor


@dataclass
class EpisodeTrace:
    """
    Everything exchanged in one batch of episodes.

    Per-round lists hold (B, l, w) tensors; round τ is index τ-1.
    """

    bits: torch.Tensor
    transmitter: TransmitterState
    receiver: ReceiverState
    forward_sent: list[torch.Tensor] = field(default_factory=list)
    forward_received: list[torch.Tensor] = field(default_factory=list)
    feedback_sent: list[torch.Tensor] = field(default_factory=list)
    feedback_received: list[torch.Tensor] = field(default_factory=list)
    decoded: DecodeResult | None = None

    @property
    def batch_size(self) -> int:
        return int(self.bits.shape[0])

    def block_errors(self) -> torch.Tensor:
        """(B, l) boolean mask of wrongly decoded bit-blocks."""
        if self.decoded is None:
            raise ValueError("episode has not been decoded")
        m = self.transmitter.protocol.m
        return labels_from_bits(self.bits, m) != self.decoded.labels

    def message_errors(self) -> torch.Tensor:
        """(B,) boolean mask of messages with at least one wrong block."""
        return self.block_errors().any(dim=-1)

    def to_records(self, config_hash: str, seed: int) -> list[dict[str, Any]]:
        """One JSON-ready record per message in the batch."""
        records = []
        for index in range(self.batch_size):
            rounds = []
            for tau in range(len(self.forward_sent)):
                entry: dict[str, Any] = {
                    "round": tau + 1,
                    "c": self.forward_sent[tau][index].flatten().tolist(),
                    "y": self.forward_received[tau][index].flatten().tolist(),
                }
                if tau < len(self.feedback_sent):
                    entry["c_fb"] = self.feedback_sent[tau][index].flatten().tolist()
                    entry["y_fb"] = self.feedback_received[tau][index].flatten().tolist()
                rounds.append(entry)
            record: dict[str, Any] = {
                "config_hash": config_hash,
                "seed": seed,
                "episode": index,
                "bits": self.bits[index].tolist(),
                "rounds": rounds,
            }
            if self.decoded is not None:
                record["decoded_bits"] = self.decoded.bits[index].tolist()
                record["block_errors"] = int(self.block_errors()[index].sum())
            records.append(record)
        return records


def _check_noise(noise: NoiseRealization, T: int, batch_size: int) -> None:  # noqa: N803
    if len(noise.forward) != T or len(noise.feedback) != T - 1:
        raise ValueError(
            f"noise realization has {len(noise.forward)} forward and {len(noise.feedback)} "
            f"feedback rounds, protocol needs {T} and {T - 1}"
        )
    for n in (*noise.forward, *noise.feedback):
        if n.shape[0] != batch_size:
            raise ValueError(f"noise batch {n.shape[0]} does not match message batch {batch_size}")


def run_ipse(
    bits: torch.Tensor,
    model: FeedbackCodeModel,
    channels: ChannelPair,
    rng: Rng | None = None,
    mode: NormMode = NormMode.TRAIN,
    noise: NoiseRealization | None = None,
) -> EpisodeTrace:
    """
    Run the T interleaved forward/feedback rounds of a batch of messages.

    Args:
        bits: (B, K) messages
        model: Parity, feedback and decoder networks
        channels: Forward and feedback noise variances
        rng: Generator the noise is drawn from when `noise` is not given
        mode: Power normalization mode (train, frozen or calibrate)
        noise: Pre-drawn noise; overrides `rng`

    Returns:
        EpisodeTrace with complete transmitter and receiver states, not yet decoded
    """
    protocol = model.config.protocol
    T, batch_size = protocol.T, int(bits.shape[0])  # noqa: N806
    dtype = model.dtype

    if noise is None:
        if rng is None:
            raise ValueError("run_ipse needs either a generator or a noise realization")
        noise = NoiseRealization.draw(
            protocol, channels, batch_size, rng, dtype=dtype, device=model.device
        )
    _check_noise(noise, T, batch_size)

    alpha = compute_alpha(channels.forward.sigma2)
    tx = TransmitterState.start(bits, protocol, dtype=dtype)
    rx = ReceiverState(protocol)
    trace = EpisodeTrace(bits=bits, transmitter=tx, receiver=rx)

    for tau in range(1, T + 1):
        if protocol.systematic and tau == 1:
            c = systematic_first_block(tx.bit_blocks.to(dtype))
        else:
            raw = model.parity(tx_knowledge_rows(tx, T))
            c = model.parity_norm(raw, tau, mode).unsqueeze(-1)
        y = c + noise.forward[tau - 1].to(dtype)
        tx.record_parity(c)
        rx.record_forward(y)
        trace.forward_sent.append(c)
        trace.forward_received.append(y)

        if tau == T:
            break

        relay = protocol.feedback_mode == FeedbackMode.PASSIVE or (
            protocol.systematic and tau == 1
        )
        if relay:
            c_fb = passive_feedback(y, alpha)
        else:
            raw_fb = model.feedback(rx_knowledge_rows(rx, T))
            c_fb = model.feedback_norm(raw_fb, tau, mode).unsqueeze(-1)
        y_fb = c_fb + noise.feedback[tau - 1].to(dtype)
        rx.record_feedback(c_fb)
        tx.record_feedback(y_fb)
        trace.feedback_sent.append(c_fb)
        trace.feedback_received.append(y_fb)

    return trace


def jpsd(receiver_state: ReceiverState, model: FeedbackCodeModel) -> DecodeResult:
    """
    Decode all bit-blocks jointly from the complete receiver knowledge.

    Ties between equal probabilities resolve to the lowest class index.
    """
    if not receiver_state.complete:
        raise ValueError(
            f"receiver state incomplete: {len(receiver_state.received_forward)} forward and "
            f"{len(receiver_state.sent_feedback)} feedback blocks"
        )
    protocol = receiver_state.protocol
    rows = rx_knowledge_rows(receiver_state, protocol.T)
    logits = model.decoder.logits(rows)
    probabilities = torch.softmax(logits, dim=-1)
    labels = probabilities.argmax(dim=-1)
    bits = bits_from_labels(labels, protocol.m).reshape(labels.shape[0], protocol.K)
    return DecodeResult(logits=logits, probabilities=probabilities, labels=labels, bits=bits)


def run_episode(
    bits: torch.Tensor,
    model: FeedbackCodeModel,
    channels: ChannelPair,
    rng: Rng | None = None,
    mode: NormMode = NormMode.TRAIN,
    noise: NoiseRealization | None = None,
) -> EpisodeTrace:
    """IPSE followed by JPSD."""
    trace = run_ipse(bits, model, channels, rng=rng, mode=mode, noise=noise)
    trace.decoded = jpsd(trace.receiver, model)
    return trace


def channel_uses(trace: EpisodeTrace) -> ChannelAccounting:
    """Channel uses per message actually spent by an episode."""
    return ChannelAccounting(
        N=sum(c.shape[1] * c.shape[2] for c in trace.forward_sent),
        N_fb=sum(c.shape[1] * c.shape[2] for c in trace.feedback_sent),
        direction_changes=len(trace.forward_sent) + len(trace.feedback_sent),
    )


def dump_traces(path: str | Path, records: Iterable[dict[str, Any]]) -> Path:
    """Write episode records as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("wb") as fh:
        for record in records:
            fh.write(orjson.dumps(record, option=orjson.OPT_SORT_KEYS) + b"\n")
            count += 1
    logger.info("traces_written", path=str(path), episodes=count)
    return path
