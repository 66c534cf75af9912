"""
Experiment Configuration
========================

Protocol, architecture and training configuration for feedback-code
experiments. One `ExperimentConfig` is the single source of truth for a run:
it is serialized next to every checkpoint, weight archive and results file,
and its hash tags every output.

Construction only checks types. The cross-field invariants (K = l·m, the
rate constraint, layout widths, ...) are reported by `validate()` so that a
broken research config can be inspected instead of failing on load.

Version: 0.1.0
"""

import hashlib
import math
from enum import Enum
from pathlib import Path
from typing import Any

import orjson
from pydantic import BaseModel, ConfigDict, Field

from shared.config.settings import Precision


class FeedbackMode(str, Enum):
    """How the receiver produces its feedback symbols."""

    ACTIVE = "active"
    PASSIVE = "passive"
    SYSTEMATIC_FIRST = "systematic_first"


class PositionalEncoding(str, Enum):
    """Positional information added before the sequence encoder."""

    NONE = "none"
    LEARNED = "learned"


class NormGranularity(str, Enum):
    """Granularity of the power normalization statistics."""

    POSITION = "position"  # one (mean, std) per (round, block)
    ROUND = "round"  # one (mean, std) per round, shared by all blocks


class NormStd(str, Enum):
    """Standard deviation convention for power normalization."""

    POPULATION = "population"
    SAMPLE = "sample"


class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# =============================================================================
# Protocol
# =============================================================================


class ProtocolConfig(_FrozenModel):
    """
    Block-feedback protocol parameters.

    A message of K bits is split into l blocks of m bits. Communication runs
    T forward blocks of l symbols (one per bit-block) interleaved with T-1
    feedback blocks of l symbols.
    """

    K: int = 51
    m: int = 3
    l: int = 17  # noqa: E741
    T: int = 9
    R: float = 1 / 3
    snr_ff_db: float = -1.0
    snr_fb_db: float = 20.0
    feedback_mode: FeedbackMode = FeedbackMode.ACTIVE

    @property
    def N_per_block(self) -> int:  # noqa: N802
        """Forward symbols per communication block."""
        return self.l

    @property
    def systematic(self) -> bool:
        return self.feedback_mode == FeedbackMode.SYSTEMATIC_FIRST

    @property
    def N(self) -> int:  # noqa: N802
        """Total forward channel uses."""
        if self.systematic:
            return self.K + (self.T - 1) * self.l
        return self.T * self.l

    @property
    def N_fb(self) -> int:  # noqa: N802
        """Total feedback channel uses."""
        if self.T <= 1:
            return 0
        if self.systematic:
            return self.K + (self.T - 2) * self.l
        return (self.T - 1) * self.l

    @property
    def direction_changes(self) -> int:
        return 2 * self.T - 1

    @property
    def sigma2_ff(self) -> float:
        return 10 ** (-self.snr_ff_db / 10)

    @property
    def sigma2_fb(self) -> float:
        return 10 ** (-self.snr_fb_db / 10)

    def slot_width(self, tau: int) -> int:
        """Symbols per block sent in round `tau` (1-based), either direction."""
        return self.m if self.systematic and tau == 1 else 1


# =============================================================================
# Architecture
# =============================================================================


class NetworkSpec(_FrozenModel):
    """
    Architecture of the parity, feedback and decoder networks.

    Input/output widths may be left out; they are then derived from the
    protocol (see `input_widths`). When given, `validate()` checks them.
    """

    d_model: int = 32
    n_layers_parity: int = 2
    n_layers_feedback: int = 2
    n_layers_decoder: int = 3
    n_heads: int = 4
    d_ffn: int = 128

    d_in_parity: int | None = None
    d_in_feedback: int | None = None
    d_in_decoder: int | None = None
    d_out_parity: int = 1
    d_out_feedback: int = 1
    d_out_decoder: int | None = None

    activation: str = "relu"
    positional_encoding: PositionalEncoding = PositionalEncoding.NONE

    extractor_layers: int = 3
    dropout: float = 0.0
    map_init_gain: float = 0.1
    norm_granularity: NormGranularity = NormGranularity.POSITION
    norm_std: NormStd = NormStd.POPULATION

    def expected_widths(self, protocol: ProtocolConfig) -> dict[str, int]:
        """Layout widths implied by the protocol."""
        extra = 2 * (protocol.m - 1) if protocol.systematic else 0
        return {
            "d_in_parity": protocol.m + 2 * (protocol.T - 1) + extra,
            "d_in_feedback": 2 * protocol.T - 1 + extra,
            "d_in_decoder": 2 * protocol.T - 1 + extra,
            "d_out_parity": 1,
            "d_out_feedback": 1,
            "d_out_decoder": 2**protocol.m,
        }

    def input_widths(self, protocol: ProtocolConfig) -> dict[str, int]:
        """Configured widths, falling back to the protocol-derived ones."""
        expected = self.expected_widths(protocol)
        return {key: getattr(self, key) or value for key, value in expected.items()}


# =============================================================================
# Training
# =============================================================================


class CurriculumSegment(_FrozenModel):
    """
    One linear SNR ramp of the curriculum.

    An endpoint left as None resolves to the protocol's target SNR.
    """

    length: int = Field(default=20_000)
    ff_start_db: float | None = None
    ff_end_db: float | None = None
    fb_start_db: float | None = None
    fb_end_db: float | None = None


class LrDecay(_FrozenModel):
    """Polynomial learning rate decay."""

    power: float = 1.0
    lr_final: float = 0.0


def _default_curriculum() -> list[CurriculumSegment]:
    return [
        # Anneal the forward SNR with an almost noiseless feedback link ...
        CurriculumSegment(length=20_000, ff_start_db=3.0, fb_start_db=100.0, fb_end_db=100.0),
        # ... then bring the feedback SNR down to its target.
        CurriculumSegment(length=20_000, fb_start_db=100.0),
    ]


class TrainConfig(_FrozenModel):
    """Optimizer, schedule and checkpointing parameters."""

    batch_size: int = 8192
    lr_init: float = 0.001
    weight_decay: float = 0.01
    grad_clip_threshold: float = 0.5
    total_batches: int = 140_000
    curriculum: list[CurriculumSegment] = Field(default_factory=_default_curriculum)
    lr_decay: LrDecay = Field(default_factory=LrDecay)
    seed: int = 0
    precision: Precision = Precision.FLOAT32
    checkpoint_interval: int = 1000
    calibration_batch_size: int = 8192


class ExperimentConfig(_FrozenModel):
    """Protocol + architecture + training, serialized as one document."""

    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    network: NetworkSpec = Field(default_factory=NetworkSpec)
    training: TrainConfig = Field(default_factory=TrainConfig)


class ValidationReport(BaseModel):
    """Violated invariants of an experiment config; empty means valid."""

    violations: list[str] = Field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations


# =============================================================================
# Validation
# =============================================================================


def _validate_protocol(p: ProtocolConfig) -> list[str]:
    errors: list[str] = []
    for name in ("T", "m", "l"):
        if getattr(p, name) < 1:
            errors.append(f"{name} must be >= 1 (got {getattr(p, name)})")
    if p.K != p.l * p.m:
        errors.append(f"K ≠ l·m: K={p.K}, l·m={p.l * p.m}")
    if not p.R > 0:
        errors.append(f"R must be > 0 (got {p.R})")
    elif p.N > p.K / p.R * (1 + 1e-9):
        errors.append(f"rate constraint violated: N={p.N} > K/R={p.K / p.R:.6g}")
    for name in ("snr_ff_db", "snr_fb_db"):
        if not math.isfinite(getattr(p, name)):
            errors.append(f"{name} must be finite")
    return errors


def _validate_network(n: NetworkSpec, p: ProtocolConfig) -> list[str]:
    errors: list[str] = []
    if n.n_heads < 1 or n.d_model % n.n_heads != 0:
        errors.append(f"d_model={n.d_model} not divisible by n_heads={n.n_heads}")
    for name in ("d_model", "d_ffn", "n_layers_parity", "n_layers_feedback", "n_layers_decoder"):
        if getattr(n, name) < 1:
            errors.append(f"{name} must be >= 1")
    if n.extractor_layers < 1:
        errors.append("extractor_layers must be >= 1")
    if not 0.0 <= n.dropout < 1.0:
        errors.append(f"dropout must be in [0, 1) (got {n.dropout})")
    if n.activation != "relu":
        errors.append(f"unsupported activation {n.activation!r}")
    for key, expected in n.expected_widths(p).items():
        value = getattr(n, key)
        if value is not None and value != expected:
            errors.append(f"{key}={value} does not match protocol layout ({expected})")
    return errors


def _validate_training(t: TrainConfig) -> list[str]:
    errors: list[str] = []
    for name in ("batch_size", "total_batches", "checkpoint_interval", "calibration_batch_size"):
        if getattr(t, name) < 1:
            errors.append(f"{name} must be >= 1")
    for name in ("lr_init", "weight_decay", "grad_clip_threshold"):
        if not getattr(t, name) > 0:
            errors.append(f"{name} must be > 0")
    if t.lr_decay.lr_final < 0 or t.lr_decay.power <= 0:
        errors.append("lr_decay requires power > 0 and lr_final >= 0")
    for i, segment in enumerate(t.curriculum):
        if segment.length < 1:
            errors.append(f"curriculum[{i}].length must be >= 1")
        for field in ("ff_start_db", "ff_end_db", "fb_start_db", "fb_end_db"):
            value = getattr(segment, field)
            if value is not None and not math.isfinite(value):
                errors.append(f"curriculum[{i}].{field} must be finite")
    curriculum_length = sum(s.length for s in t.curriculum)
    if t.total_batches < curriculum_length:
        errors.append(
            f"total_batches={t.total_batches} shorter than curriculum ({curriculum_length})"
        )
    return errors


def validate(config: ExperimentConfig) -> ValidationReport:
    """
    Check every cross-field invariant of an experiment config.

    Returns:
        ValidationReport listing the violations (empty when valid).
    """
    return ValidationReport(
        violations=[
            *_validate_protocol(config.protocol),
            *_validate_network(config.network, config.protocol),
            *_validate_training(config.training),
        ]
    )


# =============================================================================
# Presets
# =============================================================================


def default_paper_config() -> ExperimentConfig:
    """Reference configuration: K=51 bits in 17 blocks, 9 rounds, rate 1/3."""
    protocol = ProtocolConfig()
    network = NetworkSpec()
    network = network.model_copy(update=network.expected_widths(protocol))
    return ExperimentConfig(protocol=protocol, network=network, training=TrainConfig())


def desk_scale_config() -> ExperimentConfig:
    """Scaled-down experiment that trains on a desktop in reasonable time."""
    protocol = ProtocolConfig(K=12, m=3, l=4, T=6, R=0.5, snr_ff_db=2.0, snr_fb_db=20.0)
    training = TrainConfig(
        batch_size=512,
        total_batches=2000,
        curriculum=[
            CurriculumSegment(length=500, ff_start_db=3.0, fb_start_db=100.0, fb_end_db=100.0),
            CurriculumSegment(length=500, fb_start_db=100.0),
        ],
        checkpoint_interval=500,
        calibration_batch_size=8192,
    )
    return ExperimentConfig(protocol=protocol, network=NetworkSpec(), training=training)


# =============================================================================
# Persistence
# =============================================================================


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    return config.model_dump(mode="json")


def config_to_json(config: ExperimentConfig) -> bytes:
    return orjson.dumps(config_to_dict(config), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)


def config_hash(config: ExperimentConfig) -> str:
    """Short stable digest of the canonical config document."""
    canonical = orjson.dumps(config_to_dict(config), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(canonical).hexdigest()[:16]


def save_experiment(config: ExperimentConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(config_to_json(config) + b"\n")
    return path


def load_experiment(path: str | Path) -> ExperimentConfig:
    """Load a config document; missing sections take their defaults."""
    data = orjson.loads(Path(path).read_bytes())
    return ExperimentConfig.model_validate(data)


def _parse_value(raw: str) -> Any:
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError:
        return raw


def _resolve_key(data: dict[str, Any], key: str) -> list[str]:
    parts = key.split(".")
    if len(parts) > 1:
        return parts
    owners = [section for section, body in data.items() if isinstance(body, dict) and key in body]
    if len(owners) != 1:
        where = "no section" if not owners else f"sections {owners}"
        raise ValueError(f"override key {key!r} is ambiguous or unknown ({where})")
    return [owners[0], key]


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """
    Apply `key=value` overrides.

    Keys are dotted paths (``training.lr_init``) or bare field names that
    exist in exactly one section (``T``). Values are parsed as JSON and fall
    back to plain strings.
    """
    data = config_to_dict(config)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValueError(f"override must look like key=value (got {item!r})")
        path = _resolve_key(data, key.strip())
        node = data
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                raise ValueError(f"unknown config section {part!r} in {key!r}")
            node = node[part]
        if path[-1] not in node:
            raise ValueError(f"unknown config field {key!r}")
        node[path[-1]] = _parse_value(raw.strip())
    return ExperimentConfig.model_validate(data)
