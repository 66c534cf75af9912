"""
Trainer
=======

End-to-end training of the parity, feedback and decoder networks:
random messages, differentiable IPSE + JPSD, cross-entropy loss,
global-norm gradient clipping and AdamW with decoupled weight decay,
driven by the SNR curriculum and the polynomial learning-rate decay.

Outputs of a run directory:

    config.json         resolved ExperimentConfig
    metrics.csv         one row per batch
    checkpoints/        newest and best checkpoint
    final.wt/           frozen-statistics weight archive
    failure_<b>.wt/     model at a non-finite loss, with failure_<b>.json

Version: 0.1.0
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import orjson
import torch

from engine.channel import ChannelPair, derive_seed, make_rng
from engine.codec import jpsd, labels_from_bits, random_messages, run_ipse
from engine.networks.archive import WeightArchive, archive_path
from engine.networks.calibration import freeze_stats
from engine.networks.model import FeedbackCodeModel, init_model
from engine.networks.normalization import NormMode
from engine.training.checkpoint import (
    TrainState,
    load_checkpoint,
    prune_checkpoints,
    save_checkpoint,
)
from engine.training.loss import cross_entropy_loss
from engine.training.schedule import CurriculumSchedule, curriculum_snrs, lr_at
from shared.config.experiment import ExperimentConfig, config_hash, save_experiment
from shared.config.settings import Precision
from shared.logging import get_logger


logger = get_logger(__name__)

METRICS_COLUMNS = ("batch", "lr", "snr_ff_db", "snr_fb_db", "loss", "grad_norm")


@dataclass(frozen=True)
class StepResult:
    """Outcome of one optimizer step."""

    batch: int
    lr: float
    snr_ff_db: float
    snr_fb_db: float
    loss: float
    grad_norm: float

    def row(self) -> list[str]:
        return [
            str(self.batch),
            repr(self.lr),
            repr(self.snr_ff_db),
            repr(self.snr_fb_db),
            repr(self.loss),
            repr(self.grad_norm),
        ]


def model_dtype(precision: Precision) -> torch.dtype:
    return torch.float64 if precision == Precision.FLOAT64 else torch.float32


def build_optimizer(model: FeedbackCodeModel, config: ExperimentConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        model.parameters(),
        lr=config.training.lr_init,
        weight_decay=config.training.weight_decay,
    )


def _dump_failure(
    directory: Path, model: FeedbackCodeModel, batch: int, details: dict[str, object]
) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    target = WeightArchive.from_model(model).save(directory / f"failure_{batch}")
    (directory / f"failure_{batch}.json").write_bytes(
        orjson.dumps(details, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    )
    return target


def train_step(
    model: FeedbackCodeModel,
    optimizer: torch.optim.Optimizer,
    rng: torch.Generator,
    batch_index: int,
    config: ExperimentConfig,
    schedule: CurriculumSchedule | None = None,
    failure_dir: Path | None = None,
) -> StepResult:
    """
    One training batch.

    Every parameter receives a gradient (zeros where the loss does not
    reach, e.g. the feedback network under passive feedback), so the
    decoupled weight decay of AdamW applies to all of them.

    Raises:
        FloatingPointError: If the loss is not finite. The model and step
            details are dumped to `failure_dir` first when it is given.
    """
    training, protocol = config.training, config.protocol
    schedule = schedule or CurriculumSchedule.from_config(config)

    lr = lr_at(batch_index, training)
    for group in optimizer.param_groups:
        group["lr"] = lr
    snr_ff_db, snr_fb_db = curriculum_snrs(batch_index, schedule)
    channels = ChannelPair.from_snrs(snr_ff_db, snr_fb_db)

    model.train()
    optimizer.zero_grad(set_to_none=True)
    bits = random_messages(training.batch_size, protocol.K, rng)
    trace = run_ipse(bits, model, channels, rng=rng, mode=NormMode.TRAIN)
    decoded = jpsd(trace.receiver, model)
    loss = cross_entropy_loss(decoded.logits, labels_from_bits(bits, protocol.m))

    if not torch.isfinite(loss):
        details = {
            "batch": batch_index,
            "lr": lr,
            "snr_ff_db": snr_ff_db,
            "snr_fb_db": snr_fb_db,
            "loss": str(loss.item()),
        }
        if failure_dir is not None:
            dumped = _dump_failure(failure_dir, model, batch_index, details)
            logger.error("non_finite_loss", dump=str(dumped), **details)
        raise FloatingPointError(f"non-finite loss {loss.item()} at batch {batch_index}")

    loss.backward()
    for parameter in model.parameters():
        if parameter.grad is None:
            parameter.grad = torch.zeros_like(parameter)
    grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), training.grad_clip_threshold)
    optimizer.step()

    return StepResult(
        batch=batch_index,
        lr=lr,
        snr_ff_db=snr_ff_db,
        snr_fb_db=snr_fb_db,
        loss=float(loss.item()),
        grad_norm=float(grad_norm.item()),
    )


def _truncate_metrics(path: Path, batch_index: int) -> None:
    """Drop metric rows at or beyond `batch_index` so a resumed run appends cleanly."""
    if not path.exists():
        return
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    kept = ([rows[0]] + [row for row in rows[1:] if int(row[0]) < batch_index]) if rows else []
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(kept)


@dataclass
class TrainResult:
    archive: Path
    metrics: Path
    state: TrainState
    config_hash: str


class Trainer:
    """
    Owns the model, optimizer, generator and progress of one run.

    Usage:
        trainer = Trainer(config, Path("runs/desk"))
        result = trainer.run()
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: str | Path,
        device: str | torch.device = "cpu",
        log_every: int = 100,
    ) -> None:
        self.config = config
        self.output_dir = Path(output_dir)
        self.device = device
        self.log_every = log_every
        self.schedule = CurriculumSchedule.from_config(config)
        self.hash = config_hash(config)

        seed = config.training.seed
        self.model = init_model(
            config,
            derive_seed(seed, "init"),
            device=device,
            dtype=model_dtype(config.training.precision),
        )
        self.optimizer = build_optimizer(self.model, config)
        self.rng = make_rng(derive_seed(seed, "train"), device)
        self.state = TrainState(lr=config.training.lr_init)

    @property
    def metrics_path(self) -> Path:
        return self.output_dir / "metrics.csv"

    @property
    def checkpoint_dir(self) -> Path:
        return self.output_dir / "checkpoints"

    def resume(self, checkpoint: str | Path) -> None:
        """
        Restore weights, optimizer moments, generator and progress.

        Raises:
            ValueError: If the checkpoint was written for a different config
        """
        archive, payload, state = load_checkpoint(checkpoint)
        if archive.config_hash != self.hash:
            raise ValueError(
                f"checkpoint config {archive.config_hash} does not match run config {self.hash}"
            )
        self.model.load_state_dict(archive.to_model().state_dict())
        self.optimizer.load_state_dict(payload["optimizer"])  # type: ignore[arg-type]
        self.rng.set_state(payload["generator"])  # type: ignore[arg-type]
        self.state = state
        _truncate_metrics(self.metrics_path, state.batch_index)
        logger.info("training_resumed", checkpoint=str(checkpoint), batch=state.batch_index)

    def step(self) -> StepResult:
        result = train_step(
            self.model,
            self.optimizer,
            self.rng,
            self.state.batch_index,
            self.config,
            schedule=self.schedule,
            failure_dir=self.output_dir,
        )
        self.state.record(result.loss, result.lr)
        return result

    def checkpoint(self) -> Path:
        self.state.close_interval(self.config.training.checkpoint_interval)
        path = save_checkpoint(
            self.checkpoint_dir, self.model, self.optimizer, self.rng, self.state
        )
        prune_checkpoints(self.checkpoint_dir, self.state.best_batch)
        return path

    def finalize(self) -> Path:
        """Freeze the normalization statistics and write ``final.wt``."""
        calibration_rng = make_rng(derive_seed(self.config.training.seed, "calibrate"), self.device)
        self.model.eval()
        freeze_stats(self.model, self.config.training.calibration_batch_size, calibration_rng)
        return WeightArchive.from_model(self.model).save(archive_path(self.output_dir / "final"))

    def run(self, max_batches: int | None = None) -> TrainResult:
        """
        Train until `total_batches` (or `max_batches` more batches) are done.

        The final archive is only written once the full run completes.
        """
        training = self.config.training
        self.output_dir.mkdir(parents=True, exist_ok=True)
        save_experiment(self.config, self.output_dir / "config.json")

        stop = training.total_batches
        if max_batches is not None:
            stop = min(stop, self.state.batch_index + max_batches)

        new_file = not self.metrics_path.exists()
        logger.info(
            "training_started",
            config_hash=self.hash,
            start_batch=self.state.batch_index,
            stop_batch=stop,
        )
        with self.metrics_path.open("a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(METRICS_COLUMNS)
            while self.state.batch_index < stop:
                result = self.step()
                writer.writerow(result.row())
                if self.state.batch_index % self.log_every == 0:
                    fh.flush()
                    logger.info(
                        "train_step",
                        batch=result.batch,
                        loss=result.loss,
                        lr=result.lr,
                        snr_ff_db=result.snr_ff_db,
                        snr_fb_db=result.snr_fb_db,
                        grad_norm=result.grad_norm,
                    )
                if self.state.batch_index % training.checkpoint_interval == 0:
                    fh.flush()
                    self.checkpoint()

        final = archive_path(self.output_dir / "final")
        if self.state.batch_index >= training.total_batches:
            final = self.finalize()
            logger.info(
                "training_finished",
                batches=self.state.batch_index,
                last_loss=self.state.last_loss,
                archive=str(final),
            )
        return TrainResult(
            archive=final,
            metrics=self.metrics_path,
            state=self.state,
            config_hash=self.hash,
        )


def train_loop(
    config: ExperimentConfig,
    output_dir: str | Path,
    resume: str | Path | None = None,
    device: str | torch.device = "cpu",
    max_batches: int | None = None,
) -> TrainResult:
    """Train a model for `config`, optionally continuing from a checkpoint."""
    trainer = Trainer(config, output_dir, device=device)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run(max_batches=max_batches)

