"""
Feedback code model: parity, feedback and decoder units plus the two power
normalizers, built from one `ExperimentConfig`.
"""

import torch
from torch import nn

from engine.networks.normalization import PowerNormalizer
from engine.networks.units import DecoderUnit, SymbolUnit
from shared.config.experiment import ExperimentConfig, FeedbackMode


class FeedbackCodeModel(nn.Module):
    """
    The three networks of the feedback code.

    Attributes:
        parity: Transmitter unit, rows of width d_in_parity -> one symbol per block
        feedback: Receiver unit producing active feedback symbols
        decoder: Receiver unit producing 2^m logits per block
        parity_norm: Statistics of shape (T, l)
        feedback_norm: Statistics of shape (T-1, l)
    """

    def __init__(self, config: ExperimentConfig) -> None:
        super().__init__()
        self.config = config
        protocol, spec = config.protocol, config.network
        widths = spec.input_widths(protocol)

        self.parity = SymbolUnit(
            widths["d_in_parity"],
            widths["d_out_parity"],
            spec.n_layers_parity,
            protocol.l,
            spec,
            output_gain=spec.map_init_gain,
        )
        self.feedback = SymbolUnit(
            widths["d_in_feedback"],
            widths["d_out_feedback"],
            spec.n_layers_feedback,
            protocol.l,
            spec,
            output_gain=spec.map_init_gain,
        )
        self.decoder = DecoderUnit(
            widths["d_in_decoder"],
            widths["d_out_decoder"],
            spec.n_layers_decoder,
            protocol.l,
            spec,
        )
        self.parity_norm = PowerNormalizer(
            protocol.T, protocol.l, spec.norm_granularity, spec.norm_std
        )
        self.feedback_norm = PowerNormalizer(
            max(protocol.T - 1, 0), protocol.l, spec.norm_granularity, spec.norm_std
        )

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    @property
    def uses_feedback_network(self) -> bool:
        return self.config.protocol.feedback_mode != FeedbackMode.PASSIVE

    @property
    def frozen(self) -> bool:
        """Both normalizers carry frozen statistics."""
        return self.parity_norm.frozen and self.feedback_norm.frozen

    def parameter_counts(self) -> dict[str, int]:
        return {
            name: sum(p.numel() for p in unit.parameters())
            for name, unit in (
                ("parity", self.parity),
                ("feedback", self.feedback),
                ("decoder", self.decoder),
            )
        }


def init_model(
    config: ExperimentConfig,
    seed: int,
    device: str | torch.device = "cpu",
    dtype: torch.dtype = torch.float32,
) -> FeedbackCodeModel:
    """Build a freshly initialized model; the same seed gives the same weights."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = FeedbackCodeModel(config)
    return model.to(device=device, dtype=dtype)
