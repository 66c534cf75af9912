"""
Encoder Units
=============

Building blocks shared by the parity, feedback and decoder networks:

    rows (l × d_in) ─ FeatureExtractor ─> (l × d_model)
                    ─ sequence encoder ─> (l × d_model)   stack of transformer encoder layers
                    ─ output map       ─> (l × d_out)

The sequence encoder uses the standard post-norm
`torch.nn.TransformerEncoderLayer` with unmasked self-attention over the l
blocks; causality is enforced by what the protocol puts in the rows, not by
the attention pattern.

Version: 0.1.0
"""

import torch
from torch import nn

from shared.config.experiment import NetworkSpec, PositionalEncoding


class FeatureExtractor(nn.Module):
    """
    Per-row MLP mapping knowledge rows to the model width.

    `n_layers` affine layers d_in -> d_model -> ... -> d_model with ReLU
    between them. Rows never mix.
    """

    def __init__(self, d_in: int, d_model: int, n_layers: int = 3) -> None:
        super().__init__()
        self.d_in = d_in
        layers: list[nn.Module] = []
        width = d_in
        for index in range(n_layers):
            layers.append(nn.Linear(width, d_model))
            if index < n_layers - 1:
                layers.append(nn.ReLU())
            width = d_model
        self.mlp = nn.Sequential(*layers)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        if rows.shape[-1] != self.d_in:
            raise ValueError(f"expected rows of width {self.d_in}, got {rows.shape[-1]}")
        return self.mlp(rows)


class EncoderUnit(nn.Module):
    """
    Feature extractor, sequence-to-sequence encoder and output map.

    Args:
        d_in: Width of the knowledge rows
        d_out: Width of each output row (1 for symbols, 2^m for logits)
        n_layers: Number of transformer encoder layers
        n_blocks: Sequence length l (only used for learned positions)
        spec: Architecture hyperparameters
        output_gain: Scale applied to the initial output-map weights
    """

    def __init__(
        self,
        d_in: int,
        d_out: int,
        n_layers: int,
        n_blocks: int,
        spec: NetworkSpec,
        output_gain: float = 1.0,
    ) -> None:
        super().__init__()
        self.n_layers = n_layers
        self.extract = FeatureExtractor(d_in, spec.d_model, spec.extractor_layers)

        self.position: nn.Parameter | None = None
        if spec.positional_encoding == PositionalEncoding.LEARNED:
            self.position = nn.Parameter(torch.zeros(n_blocks, spec.d_model))
            nn.init.normal_(self.position, std=0.02)

        layer = nn.TransformerEncoderLayer(
            d_model=spec.d_model,
            nhead=spec.n_heads,
            dim_feedforward=spec.d_ffn,
            dropout=spec.dropout,
            activation=spec.activation,
            batch_first=True,
            norm_first=False,
        )
        self.s2s = nn.TransformerEncoder(layer, num_layers=n_layers, enable_nested_tensor=False)

        self.map = nn.Linear(spec.d_model, d_out)
        if output_gain != 1.0:
            with torch.no_grad():
                self.map.weight.mul_(output_gain)
                self.map.bias.zero_()

    def feature_extract(self, rows: torch.Tensor) -> torch.Tensor:
        """(B, l, d_in) -> (B, l, d_model), same MLP on every row."""
        return self.extract(rows)

    def s2s_encode(self, features: torch.Tensor) -> torch.Tensor:
        """(B, l, d_model) -> (B, l, d_model), mixing information across blocks."""
        if self.position is not None:
            features = features + self.position
        return self.s2s(features)

    def map_output(self, latent: torch.Tensor) -> torch.Tensor:
        """Affine output map applied to each latent row."""
        return self.map(latent)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        return self.map_output(self.s2s_encode(self.feature_extract(rows)))


class SymbolUnit(EncoderUnit):
    """Encoder unit emitting one raw (pre-normalization) symbol per block."""

    def map_symbols(self, latent: torch.Tensor) -> torch.Tensor:
        """(B, l, d_model) -> (B, l) raw symbols."""
        return self.map_output(latent).squeeze(-1)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        return self.map_symbols(self.s2s_encode(self.feature_extract(rows)))


class DecoderUnit(EncoderUnit):
    """Encoder unit emitting 2^m logits per block."""

    def logits(self, rows: torch.Tensor) -> torch.Tensor:
        """(B, l, d_in) -> (B, l, 2^m) unnormalized scores."""
        return super().forward(rows)

    def map_logits(self, latent: torch.Tensor) -> torch.Tensor:
        """(B, l, d_model) -> (B, l, 2^m) probability rows."""
        return torch.softmax(self.map_output(latent), dim=-1)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        return self.map_logits(self.s2s_encode(self.feature_extract(rows)))
