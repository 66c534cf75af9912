"""
Weight Archive
==============

Self-describing container for trained feedback codes.

An archive is a directory ``<name>.wt/`` with two files:

    manifest.json   format version, config snapshot, one entry per tensor
                    (name, shape, dtype, byte offset, byte length) and a
                    summary of the power normalization statistics
    weights.bin     all tensors concatenated, little-endian, in entry order

Float tensors are stored as ``<f4`` unless they are float64 (``<f8``);
boolean buffers as ``u1``. Loading validates every entry against the blob
and names the first corrupted one.

Version: 0.1.0
"""

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import torch
from pydantic import BaseModel, Field, ValidationError

from engine.networks.model import FeedbackCodeModel
from shared.config.experiment import ExperimentConfig, config_hash
from shared.logging import get_logger


logger = get_logger(__name__)

FORMAT_VERSION = "feedback-engine/weights-v1"
MANIFEST_FILE = "manifest.json"
BLOB_FILE = "weights.bin"
ARCHIVE_SUFFIX = ".wt"

_TORCH_TO_NUMPY: dict[torch.dtype, str] = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.bool: "u1",
}
_NUMPY_TO_TORCH: dict[str, torch.dtype] = {v: k for k, v in _TORCH_TO_NUMPY.items()}
_CODES = {"float32": "<f4", "float64": "<f8", "uint8": "u1"}


def _dtype_code(array: np.ndarray) -> str:
    return _CODES[array.dtype.name]


class ArchiveEntry(BaseModel):
    """Location and layout of one tensor inside the blob."""

    name: str
    shape: list[int]
    dtype: str
    offset: int = Field(ge=0)
    nbytes: int = Field(ge=0)


class ArchiveManifest(BaseModel):
    format_version: str
    config: dict[str, Any]
    config_hash: str
    entries: list[ArchiveEntry]
    stats: dict[str, Any] = Field(default_factory=dict)


def archive_path(path: str | Path) -> Path:
    """Append the ``.wt`` suffix when missing."""
    path = Path(path)
    return path if path.suffix == ARCHIVE_SUFFIX else path.with_name(path.name + ARCHIVE_SUFFIX)


def _stats_summary(model: FeedbackCodeModel) -> dict[str, Any]:
    return {
        "parity_norm": model.parity_norm.stats().summary(),
        "feedback_norm": model.feedback_norm.stats().summary(),
    }


@dataclass
class WeightArchive:
    """
    In-memory view of an archive: config snapshot plus named arrays in
    state-dict order.
    """

    config: ExperimentConfig
    arrays: dict[str, np.ndarray]
    stats: dict[str, Any]

    @classmethod
    def from_model(cls, model: FeedbackCodeModel) -> "WeightArchive":
        arrays: dict[str, np.ndarray] = {}
        for name, tensor in model.state_dict().items():
            if tensor.dtype not in _TORCH_TO_NUMPY:
                raise ValueError(f"cannot archive {name}: unsupported dtype {tensor.dtype}")
            arrays[name] = (
                tensor.detach().cpu().numpy().astype(_TORCH_TO_NUMPY[tensor.dtype], copy=True)
            )
        return cls(config=model.config, arrays=arrays, stats=_stats_summary(model))

    def to_model(self, device: str | torch.device = "cpu") -> FeedbackCodeModel:
        """Rebuild the model; tensors keep their archived dtype."""
        model = FeedbackCodeModel(self.config)
        expected = set(model.state_dict())
        missing = sorted(expected - set(self.arrays))
        unexpected = sorted(set(self.arrays) - expected)
        if missing or unexpected:
            raise ValueError(
                f"archive does not match the model: missing {missing}, unexpected {unexpected}"
            )

        dtypes = {_dtype_code(self.arrays[name]) for name in expected if name.endswith("weight")}
        if dtypes == {"<f8"}:
            model = model.double()

        state = {}
        for name, reference in model.state_dict().items():
            array = self.arrays[name]
            if tuple(array.shape) != tuple(reference.shape):
                raise ValueError(
                    f"archive entry {name!r}: shape {list(array.shape)} "
                    f"does not match model shape {list(reference.shape)}"
                )
            state[name] = torch.from_numpy(array.copy()).to(reference.dtype)
        model.load_state_dict(state, strict=True)
        return model.to(device)

    @property
    def frozen(self) -> bool:
        return all(part.get("frozen", False) for part in self.stats.values())

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def manifest(self) -> ArchiveManifest:
        entries: list[ArchiveEntry] = []
        offset = 0
        for name, array in self.arrays.items():
            entries.append(
                ArchiveEntry(
                    name=name,
                    shape=list(array.shape),
                    dtype=_dtype_code(array),
                    offset=offset,
                    nbytes=array.nbytes,
                )
            )
            offset += array.nbytes
        return ArchiveManifest(
            format_version=FORMAT_VERSION,
            config=self.config.model_dump(mode="json"),
            config_hash=self.config_hash,
            entries=entries,
            stats=self.stats,
        )

    def blob(self) -> bytes:
        return b"".join(np.ascontiguousarray(array).tobytes() for array in self.arrays.values())

    def digest(self) -> str:
        """Short content hash over manifest and blob; tags evaluation results."""
        sha = hashlib.sha256()
        sha.update(_dump_manifest(self.manifest()))
        sha.update(self.blob())
        return sha.hexdigest()[:16]

    def save(self, path: str | Path) -> Path:
        target = archive_path(path)
        target.mkdir(parents=True, exist_ok=True)
        (target / BLOB_FILE).write_bytes(self.blob())
        (target / MANIFEST_FILE).write_bytes(_dump_manifest(self.manifest()))
        logger.info("archive_saved", path=str(target), entries=len(self.arrays))
        return target

    @classmethod
    def load(cls, path: str | Path) -> "WeightArchive":
        """
        Read and validate an archive directory.

        Raises:
            FileNotFoundError: If the directory or one of its files is missing
            ValueError: On version mismatch or a corrupted entry
        """
        source = Path(path)
        if not source.is_dir():
            source = archive_path(source)
        manifest_file, blob_file = source / MANIFEST_FILE, source / BLOB_FILE
        for required in (manifest_file, blob_file):
            if not required.is_file():
                raise FileNotFoundError(f"weight archive file not found: {required}")

        try:
            manifest = ArchiveManifest.model_validate(orjson.loads(manifest_file.read_bytes()))
        except (orjson.JSONDecodeError, ValidationError) as exc:
            raise ValueError(f"unreadable archive manifest {manifest_file}: {exc}") from exc
        if manifest.format_version != FORMAT_VERSION:
            raise ValueError(
                f"unsupported archive format {manifest.format_version!r} "
                f"(expected {FORMAT_VERSION!r})"
            )

        blob = blob_file.read_bytes()
        arrays = _read_entries(manifest.entries, blob)
        config = ExperimentConfig.model_validate(manifest.config)
        if config_hash(config) != manifest.config_hash:
            raise ValueError("archive config snapshot does not match its recorded hash")
        return cls(config=config, arrays=arrays, stats=manifest.stats)


def _dump_manifest(manifest: ArchiveManifest) -> bytes:
    return orjson.dumps(
        manifest.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS
    )


def _read_entries(entries: list[ArchiveEntry], blob: bytes) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    expected_offset = 0
    for entry in entries:
        if entry.dtype not in _NUMPY_TO_TORCH:
            raise ValueError(f"archive entry {entry.name!r}: unsupported dtype {entry.dtype!r}")
        itemsize = np.dtype(entry.dtype).itemsize
        if entry.nbytes != math.prod(entry.shape) * itemsize:
            raise ValueError(
                f"archive entry {entry.name!r}: length {entry.nbytes} does not match "
                f"shape {entry.shape} of {entry.dtype}"
            )
        if entry.offset != expected_offset:
            raise ValueError(
                f"archive entry {entry.name!r}: offset {entry.offset}, expected {expected_offset}"
            )
        end = entry.offset + entry.nbytes
        if end > len(blob):
            raise ValueError(
                f"archive entry {entry.name!r}: bytes {entry.offset}..{end} "
                f"beyond blob of {len(blob)} bytes"
            )
        count = math.prod(entry.shape)
        if count == 0:
            arrays[entry.name] = np.empty(entry.shape, dtype=entry.dtype)
        else:
            raw = np.frombuffer(blob, dtype=entry.dtype, count=count, offset=entry.offset)
            arrays[entry.name] = raw.reshape(entry.shape).copy()
        expected_offset = end
    if expected_offset != len(blob):
        raise ValueError(f"weight blob has {len(blob) - expected_offset} trailing bytes")
    return arrays
