"""Training objective."""

import torch
import torch.nn.functional as F  # noqa: N812


def cross_entropy_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """
    Block-wise cross-entropy, summed over the l blocks and averaged over the batch.

    Each block contributes -log softmax(logits)[y], the score of the true class.
    The objective is sometimes written with the indicator 1{y != c} inside the
    sum; taken literally that would reward the wrong classes, so the standard
    true-class form is used.

    Args:
        logits: (B, l, 2^m) decoder scores
        labels: (B, l) true class indices

    Returns:
        Scalar loss; l·m·ln 2 for uninformative (uniform) logits.
    """
    if logits.shape[:-1] != labels.shape:
        raise ValueError(
            f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}"
        )
    batch_size = logits.shape[0]
    total = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1).long(), reduction="sum"
    )
    return total / batch_size
