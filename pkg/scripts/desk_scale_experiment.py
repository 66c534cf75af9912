#!/usr/bin/env python3
"""
Desk-Scale Experiment
=====================

Trains the desk-scale protocol (K=12, l=4, T=6) with active and with
passive feedback, evaluates both over a few forward SNRs and reports the
BLER side by side. An active code that does worse than the passive one is
flagged, not treated as a failure.

Usage:
    python scripts/desk_scale_experiment.py
    python scripts/desk_scale_experiment.py --batches 1000 --snr-ff 0 1 2 --output-dir runs/desk

Version: 0.1.0
"""

import argparse
import sys
from pathlib import Path


# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import orjson

from engine.evaluation import compare_modes
from engine.networks import WeightArchive
from engine.training import train_loop
from shared.config import FeedbackMode, apply_overrides, config_hash, desk_scale_config
from shared.config.settings import EvaluationSettings, get_settings
from shared.logging import get_logger, setup_logging


settings = get_settings()
setup_logging(
    log_level=settings.log_level.value,
    json_logs=settings.json_output,
    service_name="desk-experiment",
)
logger = get_logger(__name__)


def parse_args() -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="Train and compare active/passive desk-scale feedback codes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--output-dir", type=Path, default=Path("runs/desk"))
    parser.add_argument("--batches", type=int, default=None, help="Override total_batches")
    parser.add_argument("--snr-ff", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    parser.add_argument("--min-errors", type=int, default=100)
    parser.add_argument("--max-trials", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args()


def main(args: argparse.Namespace) -> int:
    base = desk_scale_config()
    overrides = [f"training.seed={args.seed}"]
    if args.batches is not None:
        overrides.append(f"training.total_batches={args.batches}")
        # keep the curriculum inside the shortened run
        half = max(args.batches // 4, 1)
        overrides.append(
            "training.curriculum="
            + orjson.dumps(
                [
                    {"length": half, "ff_start_db": 3.0, "fb_start_db": 100.0, "fb_end_db": 100.0},
                    {"length": half, "fb_start_db": 100.0},
                ]
            ).decode()
        )
        overrides.append(f"training.checkpoint_interval={max(args.batches // 4, 1)}")
    base = apply_overrides(base, overrides)

    archives: dict[str, WeightArchive] = {}
    final_losses: dict[str, float | None] = {}
    for mode in (FeedbackMode.ACTIVE, FeedbackMode.PASSIVE):
        config = apply_overrides(base, [f"protocol.feedback_mode={mode.value}"])
        logger.info("training_mode", mode=mode.value, config_hash=config_hash(config))
        result = train_loop(config, args.output_dir / mode.value)
        archives[mode.value] = WeightArchive.load(result.archive)
        final_losses[mode.value] = result.state.last_loss

    options = EvaluationSettings(
        batch_size=10_000, min_errors=args.min_errors, max_trials=args.max_trials
    )
    rows = compare_modes(archives, args.snr_ff, base.protocol.snr_fb_db, args.seed, options)

    print(f"\n{'=' * 64}")
    print("Desk-scale active vs passive feedback")
    print(f"{'=' * 64}")
    print(f"final loss  active={final_losses['active']}  passive={final_losses['passive']}")
    print(f"{'snr_ff_db':>10} {'active':>12} {'passive':>12} {'ratio':>8}  flag")
    inverted = 0
    for row in rows:
        flag = "INVERTED" if row.bler_active > row.bler_passive else ""
        inverted += bool(flag)
        print(
            f"{row.snr_ff_db:>10.2f} {row.bler_active:>12.4e} {row.bler_passive:>12.4e} "
            f"{row.ratio:>8.3g}  {flag}"
        )

    summary = {
        "config_hash": config_hash(base),
        "final_loss": final_losses,
        "rows": [row.model_dump() for row in rows],
        "inverted_points": inverted,
    }
    summary_path = args.output_dir / "summary.json"
    summary_path.write_bytes(orjson.dumps(summary, option=orjson.OPT_INDENT_2))
    print(f"\nsummary: {summary_path}")
    if inverted:
        logger.warning("active_not_better", inverted_points=inverted)
    return 0


if __name__ == "__main__":
    sys.exit(main(parse_args()))
