"""
Training Checkpoints
====================

A checkpoint is a directory holding everything needed to continue a run
bit-exactly:

    weights.wt/     WeightArchive of the model (parameters and norm buffers)
    optimizer.pt    optimizer state dict and generator state (torch.save)
    state.json      TrainState

Only the newest checkpoint and the one with the lowest interval loss are
kept.

Version: 0.1.0
"""

import shutil
from pathlib import Path

import orjson
import torch
from pydantic import BaseModel, Field

from engine.networks.archive import WeightArchive
from engine.networks.model import FeedbackCodeModel
from shared.logging import get_logger


logger = get_logger(__name__)

WEIGHTS_NAME = "weights.wt"
OPTIMIZER_FILE = "optimizer.pt"
STATE_FILE = "state.json"


class TrainState(BaseModel):
    """
    Progress of a training run.

    `batch_index` is the number of completed batches. Optimizer moments and
    generator state are stored next to it in ``optimizer.pt``.
    """

    batch_index: int = 0
    lr: float = 0.0
    last_loss: float | None = None
    interval_loss: float | None = None
    best_loss: float | None = None
    best_batch: int | None = None
    loss_history: list[float] = Field(default_factory=list)

    def record(self, loss: float, lr: float) -> None:
        self.batch_index += 1
        self.lr = lr
        self.last_loss = loss
        self.loss_history.append(loss)

    def close_interval(self, interval: int) -> float:
        """Mean loss of the last `interval` batches; updates the best-so-far."""
        window = self.loss_history[-interval:]
        self.interval_loss = sum(window) / len(window)
        if self.best_loss is None or self.interval_loss < self.best_loss:
            self.best_loss = self.interval_loss
            self.best_batch = self.batch_index
        return self.interval_loss


def checkpoint_name(batch_index: int) -> str:
    return f"batch_{batch_index:07d}"


def save_checkpoint(
    directory: str | Path,
    model: FeedbackCodeModel,
    optimizer: torch.optim.Optimizer,
    rng: torch.Generator,
    state: TrainState,
) -> Path:
    """Write a checkpoint directory named after the completed batch count."""
    target = Path(directory) / checkpoint_name(state.batch_index)
    target.mkdir(parents=True, exist_ok=True)
    WeightArchive.from_model(model).save(target / WEIGHTS_NAME)
    torch.save(
        {"optimizer": optimizer.state_dict(), "generator": rng.get_state()},
        target / OPTIMIZER_FILE,
    )
    (target / STATE_FILE).write_bytes(
        orjson.dumps(state.model_dump(mode="json"), option=orjson.OPT_INDENT_2)
    )
    logger.info(
        "checkpoint_saved",
        path=str(target),
        batch=state.batch_index,
        interval_loss=state.interval_loss,
    )
    return target


def load_checkpoint(path: str | Path) -> tuple[WeightArchive, dict[str, object], TrainState]:
    """
    Read a checkpoint directory.

    Returns:
        (archive, {"optimizer": ..., "generator": ...}, state)

    Raises:
        FileNotFoundError: If the directory or one of its files is missing
    """
    source = Path(path)
    for required in (source / OPTIMIZER_FILE, source / STATE_FILE):
        if not required.is_file():
            raise FileNotFoundError(f"checkpoint file not found: {required}")
    archive = WeightArchive.load(source / WEIGHTS_NAME)
    payload = torch.load(source / OPTIMIZER_FILE, map_location="cpu", weights_only=True)
    state = TrainState.model_validate(orjson.loads((source / STATE_FILE).read_bytes()))
    return archive, payload, state


def prune_checkpoints(directory: str | Path, best_batch: int | None) -> list[Path]:
    """Delete all checkpoints except the newest and the best; returns the removed paths."""
    root = Path(directory)
    existing = sorted(p for p in root.glob("batch_*") if p.is_dir())
    keep = {existing[-1]} if existing else set()
    if best_batch is not None:
        keep.add(root / checkpoint_name(best_batch))
    removed = [p for p in existing if p not in keep]
    for path in removed:
        shutil.rmtree(path)
    return removed
