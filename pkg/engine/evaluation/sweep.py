"""
SNR Sweeps and Mode Comparison
==============================

`sweep` evaluates one BlerPoint per forward SNR, each from its own derived
seed, appending every finished point to a JSON-lines file so an
interrupted sweep resumes where it stopped.

`compare_modes` runs the same sweep for an active-feedback and a
passive-feedback archive whose configs agree in everything but the
feedback mode.

Version: 0.1.0
"""

import hashlib
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import orjson
from pydantic import BaseModel, ConfigDict

from engine.channel import ChannelPair, derive_seed
from engine.evaluation.bler import (
    BlerPoint,
    estimate_bler,
    model_simulator,
    prepare_for_evaluation,
)
from engine.evaluation.results import append_result_jsonl, read_results
from engine.networks.archive import WeightArchive
from engine.networks.model import FeedbackCodeModel
from shared.config import settings
from shared.config.experiment import config_hash
from shared.config.settings import EvaluationSettings
from shared.logging import get_logger


logger = get_logger(__name__)


def point_seed(seed: int, snr_ff_db: float, snr_fb_db: float) -> int:
    """Seed of one operating point, independent of the sweep order."""
    return derive_seed(seed, f"eval:{snr_ff_db!r}:{snr_fb_db!r}")


def evaluation_key(seed: int, options: EvaluationSettings) -> str:
    """Short digest of the master seed and the Monte-Carlo options of a point."""
    canonical = orjson.dumps(
        {"seed": seed, **options.model_dump(mode="json")}, option=orjson.OPT_SORT_KEYS
    )
    return hashlib.sha256(canonical).hexdigest()[:16]


def evaluate_point(
    model: FeedbackCodeModel,
    snr_ff_db: float,
    snr_fb_db: float,
    seed: int,
    options: EvaluationSettings | None = None,
    archive_hash: str = "",
) -> BlerPoint:
    """BLER of a frozen model at one (forward, feedback) SNR pair."""
    options = options or settings.evaluation
    model = prepare_for_evaluation(model, options.precision)
    protocol = model.config.protocol
    return estimate_bler(
        model_simulator(model, ChannelPair.from_snrs(snr_ff_db, snr_fb_db)),
        m=protocol.m,
        blocks_per_message=protocol.l,
        snr_ff_db=snr_ff_db,
        snr_fb_db=snr_fb_db,
        seed=point_seed(seed, snr_ff_db, snr_fb_db),
        batch_size=options.batch_size,
        min_errors=options.min_errors,
        max_trials=options.max_trials,
        shards=options.shards,
        device=model.device,
        config_hash=config_hash(model.config),
        archive_hash=archive_hash,
        evaluation_key=evaluation_key(seed, options),
    )


def _warn_if_not_monotone(points: Sequence[BlerPoint]) -> None:
    ordered = sorted(points, key=lambda p: p.snr_ff_db)
    for lower, higher in zip(ordered, ordered[1:]):
        # only rises beyond both confidence intervals are reported
        if higher.ci95[0] > lower.ci95[1]:
            logger.warning(
                "bler_not_monotone",
                snr_low=lower.snr_ff_db,
                bler_low=lower.bler,
                snr_high=higher.snr_ff_db,
                bler_high=higher.bler,
            )


def sweep(
    model: FeedbackCodeModel,
    snr_ff_list: Sequence[float],
    snr_fb_db: float,
    seed: int,
    results_path: str | Path | None = None,
    options: EvaluationSettings | None = None,
    archive_hash: str = "",
) -> list[BlerPoint]:
    """
    Evaluate one BlerPoint per forward SNR.

    With `results_path`, points already present for the same config,
    archive, seed and evaluation options are reused and new points are
    appended as they finish.

    Returns:
        Points in the order of `snr_ff_list`
    """
    options = options or settings.evaluation
    identity = (config_hash(model.config), archive_hash, evaluation_key(seed, options))
    done: dict[tuple[float, float], BlerPoint] = {}
    if results_path is not None and Path(results_path).exists():
        for point in read_results(results_path):
            if (point.config_hash, point.archive_hash, point.evaluation_key) == identity:
                done[(point.snr_ff_db, point.snr_fb_db)] = point
        if done:
            logger.info("sweep_resumed", path=str(results_path), finished=len(done))

    points = []
    for snr_ff_db in snr_ff_list:
        key = (float(snr_ff_db), float(snr_fb_db))
        if key in done:
            points.append(done[key])
            continue
        point = evaluate_point(
            model, key[0], key[1], seed, options=options, archive_hash=archive_hash
        )
        logger.info(
            "sweep_point",
            snr_ff_db=point.snr_ff_db,
            snr_fb_db=point.snr_fb_db,
            bler=point.bler,
            trials=point.trials,
            cap_hit=point.cap_hit,
        )
        if results_path is not None:
            append_result_jsonl(results_path, point)
        points.append(point)

    _warn_if_not_monotone(points)
    return points


class ModeComparison(BaseModel):
    """Active versus passive feedback at one operating point."""

    model_config = ConfigDict(frozen=True)

    snr_ff_db: float
    snr_fb_db: float
    bler_active: float
    bler_passive: float
    ratio: float
    trials_active: int
    trials_passive: int


COMPARISON_COLUMNS = tuple(ModeComparison.model_fields)


def bler_ratio(bler_passive: float, bler_active: float) -> float:
    """passive / active; 1.0 when both are equal (including both zero)."""
    if bler_passive == bler_active:
        return 1.0
    if bler_active == 0.0:
        return float("inf")
    return bler_passive / bler_active


def _comparable(config: dict[str, Any]) -> dict[str, Any]:
    protocol = {k: v for k, v in config["protocol"].items() if k != "feedback_mode"}
    return {**config, "protocol": protocol}


def compare_modes(
    archives: dict[str, WeightArchive],
    snr_ff_list: Sequence[float],
    snr_fb_db: float,
    seed: int,
    options: EvaluationSettings | None = None,
) -> list[ModeComparison]:
    """
    BLER of an active and a passive archive side by side.

    Both archives are evaluated with the same per-point seeds.

    The labels name the two sides of the table; the archives' own feedback
    modes are not checked against them, so one archive passed twice gives a
    ratio of 1.0 everywhere.

    Raises:
        ValueError: If a label is missing or the configs differ in anything
            but the feedback mode
    """
    if set(archives) != {"active", "passive"}:
        raise ValueError(f"expected 'active' and 'passive' archives (got {sorted(archives)})")

    active_config = archives["active"].config.model_dump(mode="json")
    passive_config = archives["passive"].config.model_dump(mode="json")
    if _comparable(active_config) != _comparable(passive_config):
        raise ValueError("archive configs differ in more than the feedback mode")

    results: dict[str, list[BlerPoint]] = {}
    for label, archive in archives.items():
        results[label] = sweep(
            archive.to_model(),
            snr_ff_list,
            snr_fb_db,
            seed,
            options=options,
            archive_hash=archive.digest(),
        )

    rows = []
    for active, passive in zip(results["active"], results["passive"]):
        rows.append(
            ModeComparison(
                snr_ff_db=active.snr_ff_db,
                snr_fb_db=active.snr_fb_db,
                bler_active=active.bler,
                bler_passive=passive.bler,
                ratio=bler_ratio(passive.bler, active.bler),
                trials_active=active.trials,
                trials_passive=passive.trials,
            )
        )
    return rows
