"""Freezing of the power normalization statistics after training."""

import torch

from engine.channel import ChannelPair, Rng
from engine.networks.model import FeedbackCodeModel
from engine.networks.normalization import NormMode
from shared.logging import get_logger


logger = get_logger(__name__)


def freeze_stats(
    model: FeedbackCodeModel,
    calibration_batch_size: int,
    rng: Rng,
    channels: ChannelPair | None = None,
) -> FeedbackCodeModel:
    """
    Record per-(round, block) statistics on a fresh random batch and freeze them.

    Runs one IPSE pass in calibrate mode at the protocol's target SNRs unless
    `channels` is given. Statistics of rounds that bypass normalization
    (relayed or systematic rounds) stay at mean 0, std 1.

    Raises:
        ValueError: If the calibration batch is smaller than 2
    """
    # deferred: the codec itself depends on the networks package
    from engine.codec import random_messages, run_ipse

    if calibration_batch_size < 2:
        raise ValueError(
            f"calibration batch must hold at least 2 messages (got {calibration_batch_size})"
        )

    protocol = model.config.protocol
    channels = channels or ChannelPair.for_protocol(protocol)

    model.parity_norm.unfreeze()
    model.feedback_norm.unfreeze()
    bits = random_messages(calibration_batch_size, protocol.K, rng)
    with torch.no_grad():
        run_ipse(bits, model, channels, rng=rng, mode=NormMode.CALIBRATE)
    model.parity_norm.mark_frozen()
    model.feedback_norm.mark_frozen()

    logger.info(
        "stats_frozen",
        calibration_batch_size=calibration_batch_size,
        parity=model.parity_norm.stats().summary(),
        feedback=model.feedback_norm.stats().summary(),
    )
    return model
