"""
BLER Estimation
===============

Monte-Carlo block error rate of a feedback code.

Messages are simulated in batches across seeded shards until the combined
message errors reach `min_errors` or the trial cap is hit. Shards run in
synchronous rounds and their counts are merged in shard order, so a given
(seed, shards, batch_size) always yields the same point.

Version: 0.1.0
"""

import copy
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import binomtest

from engine.channel import ChannelPair, Rng, make_rng, shard_seed
from engine.codec import jpsd, random_messages, run_ipse
from engine.networks.model import FeedbackCodeModel
from engine.networks.normalization import NormMode
from shared.config.settings import Precision
from shared.logging import get_logger


logger = get_logger(__name__)

# simulate(batch_size, rng) -> (bits, decoded bits), both (batch_size, K)
Simulator = Callable[[int, Rng], tuple[torch.Tensor, torch.Tensor]]

_SLACK = 1e-12


class BlerPoint(BaseModel):
    """One evaluated (forward SNR, feedback SNR) operating point."""

    model_config = ConfigDict(frozen=True)

    snr_ff_db: float
    snr_fb_db: float
    trials: int = Field(ge=1)
    block_errors: int = Field(ge=0)
    bler: float = Field(ge=0.0, le=1.0)
    ci95: tuple[float, float]
    per_block_error_rate: float = Field(ge=0.0, le=1.0)
    blocks_per_message: int = Field(ge=1)
    wall_time: float = Field(ge=0.0)
    cap_hit: bool
    config_hash: str = ""
    archive_hash: str = ""
    evaluation_key: str = ""

    @model_validator(mode="after")
    def _check_rates(self) -> "BlerPoint":
        if self.block_errors > self.trials:
            raise ValueError(f"block_errors={self.block_errors} exceeds trials={self.trials}")
        upper = min(1.0, self.blocks_per_message * self.per_block_error_rate)
        if not self.per_block_error_rate - _SLACK <= self.bler <= upper + _SLACK:
            raise ValueError(
                f"inconsistent error rates: per_block={self.per_block_error_rate}, "
                f"bler={self.bler}, l·per_block bound={upper}"
            )
        return self


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval of a binomial proportion."""
    interval = binomtest(k=errors, n=trials).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(interval.low), float(interval.high)


def count_errors(bits: torch.Tensor, decoded: torch.Tensor, m: int) -> tuple[int, int]:
    """(message errors, bit-block errors) of one batch."""
    wrong = (bits.long() != decoded.long()).reshape(bits.shape[0], -1, m).any(dim=-1)
    return int(wrong.any(dim=-1).sum()), int(wrong.sum())


def _split(remaining: int, batch_size: int, shards: int) -> list[int]:
    sizes = []
    for _ in range(shards):
        size = min(batch_size, remaining)
        if size == 0:
            break
        sizes.append(size)
        remaining -= size
    return sizes


def estimate_bler(
    simulate: Simulator,
    m: int,
    blocks_per_message: int,
    snr_ff_db: float,
    snr_fb_db: float,
    seed: int,
    batch_size: int = 10_000,
    min_errors: int = 100,
    max_trials: int = 100_000_000,
    shards: int = 1,
    device: str | torch.device = "cpu",
    config_hash: str = "",
    archive_hash: str = "",
    evaluation_key: str = "",
) -> BlerPoint:
    """
    Estimate BLER by simulation with an error-count stopping rule.

    Args:
        simulate: Batch simulator returning true and decoded bits
        m: Bits per bit-block
        blocks_per_message: l, bit-blocks per message
        seed: Master seed; shard s draws from ``seed + s``
        batch_size: Messages per shard per round
        min_errors: Stop once this many message errors are observed
        max_trials: Hard cap on simulated messages; the last batch is truncated
        evaluation_key: Digest of the seed and options, matched when a sweep resumes

    Returns:
        BlerPoint; `cap_hit` is set when the cap stopped the run first
    """
    if min(batch_size, shards, max_trials, min_errors) < 1:
        raise ValueError(
            "batch_size, shards, max_trials and min_errors must all be >= 1 "
            f"(got {batch_size}, {shards}, {max_trials}, {min_errors})"
        )

    rngs = [make_rng(shard_seed(seed, s), device) for s in range(shards)]
    trials = errors = block_errors = 0
    started = time.perf_counter()

    def run_shard(job: tuple[int, int]) -> tuple[int, int, int]:
        index, size = job
        bits, decoded = simulate(size, rngs[index])
        message_err, block_err = count_errors(bits, decoded, m)
        return size, message_err, block_err

    with ThreadPoolExecutor(max_workers=shards) as pool:
        while errors < min_errors and trials < max_trials:
            sizes = _split(max_trials - trials, batch_size, shards)
            for size, message_err, block_err in pool.map(run_shard, enumerate(sizes)):
                trials += size
                errors += message_err
                block_errors += block_err
            logger.debug("bler_round", trials=trials, errors=errors, snr_ff_db=snr_ff_db)

    cap_hit = errors < min_errors
    point = BlerPoint(
        snr_ff_db=snr_ff_db,
        snr_fb_db=snr_fb_db,
        trials=trials,
        block_errors=errors,
        bler=errors / trials,
        ci95=wilson_interval(errors, trials),
        per_block_error_rate=block_errors / (trials * blocks_per_message),
        blocks_per_message=blocks_per_message,
        wall_time=time.perf_counter() - started,
        cap_hit=cap_hit,
        config_hash=config_hash,
        archive_hash=archive_hash,
        evaluation_key=evaluation_key,
    )
    if cap_hit:
        logger.warning(
            "bler_trial_cap_hit",
            trials=trials,
            errors=errors,
            min_errors=min_errors,
            snr_ff_db=snr_ff_db,
        )
    return point


def prepare_for_evaluation(
    model: FeedbackCodeModel, precision: Precision = Precision.FLOAT64
) -> FeedbackCodeModel:
    """
    Copy of the model in eval mode and the evaluation precision (float64
    unless configured otherwise). The caller's model is left untouched.
    """
    dtype = torch.float64 if precision == Precision.FLOAT64 else torch.float32
    return copy.deepcopy(model).to(dtype=dtype).eval()


def model_simulator(model: FeedbackCodeModel, channels: ChannelPair) -> Simulator:
    """
    Batch simulator backed by a trained model with frozen statistics.

    Raises:
        ValueError: If the power normalization statistics are not frozen
    """
    if not model.frozen:
        raise ValueError("model statistics are not frozen; run freeze_stats before evaluation")
    K = model.config.protocol.K  # noqa: N806

    def simulate(batch_size: int, rng: Rng) -> tuple[torch.Tensor, torch.Tensor]:
        bits = random_messages(batch_size, K, rng)
        with torch.no_grad():
            trace = run_ipse(bits, model, channels, rng=rng, mode=NormMode.FROZEN)
            decoded = jpsd(trace.receiver, model)
        return bits, decoded.bits

    return simulate
