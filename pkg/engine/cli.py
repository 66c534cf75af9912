"""
Command Line Interface
======================

``feedback-engine`` subcommands:

    train      train a model, write metrics, checkpoints and ``final.wt``
    evaluate   BLER at one (forward, feedback) SNR pair
    sweep      BLER over a list of forward SNRs (resumable)
    compare    active versus passive archives side by side
    plot       BLER curves from results files
    inspect    archive manifest, config snapshot and frozen statistics
    export     resolved config or episode traces

Exit codes: 0 success, 1 invalid input, 2 I/O error, 3 numerical failure.

Usage:
    feedback-engine train --config configs/desk.json --set training.total_batches=500
    feedback-engine sweep --archive runs/final.wt --snr-ff -1,0,1,2 --snr-fb 20

Version: 0.1.0
"""

import argparse
import math
import re
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

import orjson
import torch

from engine.channel import ChannelPair, derive_seed, make_rng
from engine.codec import dump_traces, random_messages, run_episode
from engine.evaluation import (
    COMPARISON_COLUMNS,
    compare_modes,
    format_table,
    plot_bler_curves,
    sweep,
    write_csv,
    write_results_csv,
    write_results_jsonl,
)
from engine.evaluation.bler import prepare_for_evaluation
from engine.networks import NormMode, WeightArchive, freeze_stats
from engine.networks.model import FeedbackCodeModel
from engine.training import train_loop
from shared.config import settings
from shared.config.experiment import (
    ExperimentConfig,
    apply_overrides,
    config_hash,
    config_to_json,
    default_paper_config,
    load_experiment,
    save_experiment,
    validate,
)
from shared.config.settings import EvaluationSettings
from shared.logging import bind_context, get_logger, run_context, setup_logging


logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

# "-1,0,1,2": argparse reads a leading minus as an option unless it is a single number
_NUMBER_LIST = re.compile(r"-\d*\.?\d+(,-?\d*\.?\d+)+")


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting bad usage as ValueError (exit code 1)."""

    def error(self, message: str) -> NoReturn:
        raise ValueError(f"{self.prog}: {message}")


class _FloatList(argparse.Action):
    """Collects floats given space separated, comma separated or both."""

    def __call__(
        self,
        parser: argparse.ArgumentParser,
        namespace: argparse.Namespace,
        values: str | Sequence[Any] | None,
        option_string: str | None = None,
    ) -> None:
        parts = [values] if isinstance(values, str) else list(values or [])
        try:
            floats = [float(x) for part in parts for x in str(part).split(",")]
        except ValueError:
            raise argparse.ArgumentError(self, f"invalid number list {parts!r}") from None
        setattr(namespace, self.dest, floats)


def _attach_number_lists(argv: Sequence[str]) -> list[str]:
    """Join ``--flag -1,0,1`` into ``--flag=-1,0,1`` so the list is not taken for an option."""
    joined: list[str] = []
    for token in argv:
        previous = joined[-1] if joined else ""
        if _NUMBER_LIST.fullmatch(token) and previous.startswith("--") and "=" not in previous:
            joined[-1] = f"{previous}={token}"
        else:
            joined.append(token)
    return joined


# =============================================================================
# Config resolution
# =============================================================================


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Config file (or the reference config) + ``--set`` overrides + ``--seed``.

    Raises:
        ValueError: If the resolved config violates an invariant
    """
    config = load_experiment(args.config) if args.config else default_paper_config()
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"training.seed={args.seed}")
    if overrides:
        config = apply_overrides(config, overrides)
    report = validate(config)
    if not report.is_valid:
        raise ValueError("invalid config: " + "; ".join(report.violations))
    return config


def _announce(config: ExperimentConfig) -> str:
    digest = config_hash(config)
    bind_context(config_hash=digest)
    logger.info("config_resolved", config_hash=digest)
    print(f"config_hash: {digest}")
    return digest


def _reject_config_flags(args: argparse.Namespace) -> None:
    """Archive commands run on the config stored in the archive."""
    if args.config is not None or args.set:
        raise ValueError(
            f"{args.command} uses the config stored in the archive; --config and --set "
            "are not accepted"
        )


def _evaluation_options(args: argparse.Namespace) -> EvaluationSettings:
    updates: dict[str, Any] = {
        key: value
        for key, value in (
            ("batch_size", args.batch_size),
            ("min_errors", args.min_errors),
            ("max_trials", args.max_trials),
            ("shards", args.shards),
        )
        if value is not None
    }
    return settings.evaluation.model_copy(update=updates)


def _load_for_evaluation(args: argparse.Namespace) -> tuple[FeedbackCodeModel, WeightArchive, int]:
    archive = WeightArchive.load(args.archive)
    model = archive.to_model(device=settings.device)
    seed = args.seed if args.seed is not None else archive.config.training.seed
    if not model.frozen:
        if not args.freeze:
            raise ValueError(
                f"archive {args.archive} has no frozen statistics; pass --freeze to calibrate"
            )
        rng = make_rng(derive_seed(seed, "calibrate"), settings.device)
        freeze_stats(model, archive.config.training.calibration_batch_size, rng)
        archive = WeightArchive.from_model(model)
    return model, archive, seed


# =============================================================================
# Commands
# =============================================================================


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    _announce(config)
    result = train_loop(
        config,
        args.output_dir,
        resume=args.resume,
        device=settings.device,
        max_batches=args.max_batches,
    )
    print(f"batches: {result.state.batch_index}")
    print(f"metrics: {result.metrics}")
    if result.archive.exists():
        print(f"archive: {result.archive}")
    return EXIT_OK


def _run_sweep(args: argparse.Namespace, snrs: Sequence[float], stem: str) -> int:
    model, archive, seed = _load_for_evaluation(args)
    _announce(model.config)
    protocol = model.config.protocol
    snr_fb = args.snr_fb if args.snr_fb is not None else protocol.snr_fb_db
    output_dir = Path(args.output_dir)
    jsonl = output_dir / f"{stem}.jsonl"

    points = sweep(
        model,
        snrs,
        snr_fb,
        seed,
        results_path=jsonl,
        options=_evaluation_options(args),
        archive_hash=archive.digest(),
    )
    write_results_csv(output_dir / f"{stem}.csv", points)
    write_results_jsonl(jsonl, points)
    print(format_table(points))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    _reject_config_flags(args)
    archive_config = WeightArchive.load(args.archive).config
    snr_ff = args.snr_ff if args.snr_ff is not None else archive_config.protocol.snr_ff_db
    return _run_sweep(args, [snr_ff], "bler")


def cmd_sweep(args: argparse.Namespace) -> int:
    _reject_config_flags(args)
    return _run_sweep(args, args.snr_ff, "sweep")


def cmd_compare(args: argparse.Namespace) -> int:
    _reject_config_flags(args)
    archives = {
        "active": WeightArchive.load(args.active),
        "passive": WeightArchive.load(args.passive),
    }
    _announce(archives["active"].config)
    seed = args.seed if args.seed is not None else archives["active"].config.training.seed
    reference = archives["active"].config.protocol
    snr_fb = args.snr_fb if args.snr_fb is not None else reference.snr_fb_db
    rows = compare_modes(archives, args.snr_ff, snr_fb, seed, options=_evaluation_options(args))
    path = write_csv(
        Path(args.output_dir) / "comparison.csv",
        COMPARISON_COLUMNS,
        (row.model_dump() for row in rows),
    )
    for row in rows:
        print(
            f"snr_ff={row.snr_ff_db:6.2f} active={row.bler_active:.4e} "
            f"passive={row.bler_passive:.4e} ratio={row.ratio:.3g}"
        )
    print(f"comparison: {path}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    output = args.output or Path(args.output_dir) / "bler.png"
    path = plot_bler_curves(args.results, output, labels=args.label, title=args.title)
    print(f"figure: {path}")
    return EXIT_OK


def inspect_archive(archive: WeightArchive) -> dict[str, Any]:
    """Per-network tensor listing, totals, layer counts, config and statistics."""
    manifest = archive.manifest()
    networks: dict[str, dict[str, Any]] = {}
    for entry in manifest.entries:
        network = entry.name.split(".", 1)[0]
        info = networks.setdefault(network, {"tensors": [], "parameters": 0})
        info["tensors"].append({"name": entry.name, "shape": entry.shape, "dtype": entry.dtype})
        info["parameters"] += math.prod(entry.shape)
    spec = archive.config.network
    for name, layers in (
        ("parity", spec.n_layers_parity),
        ("feedback", spec.n_layers_feedback),
        ("decoder", spec.n_layers_decoder),
    ):
        if name in networks:
            networks[name]["layers"] = layers
    return {
        "format_version": manifest.format_version,
        "config_hash": manifest.config_hash,
        "digest": archive.digest(),
        "networks": networks,
        "total_parameters": sum(info["parameters"] for info in networks.values()),
        "config": manifest.config,
        "stats": manifest.stats,
    }


def cmd_inspect(args: argparse.Namespace) -> int:
    _reject_config_flags(args)
    report = inspect_archive(WeightArchive.load(args.archive))
    if args.json:
        print(orjson.dumps(report, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS).decode())
        return EXIT_OK

    print(f"format:     {report['format_version']}")
    print(f"config:     {report['config_hash']}")
    print(f"digest:     {report['digest']}")
    for name, info in report["networks"].items():
        layers = f", {info['layers']} layers" if "layers" in info else ""
        print(f"\n[{name}] {info['parameters']} values{layers}")
        for tensor in info["tensors"]:
            print(f"  {tensor['name']:<60} {tensor['shape']!s:<16} {tensor['dtype']}")
    print(f"\ntotal:      {report['total_parameters']}")
    for name, summary in report["stats"].items():
        print(f"{name}: {summary}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    output_dir = Path(args.output_dir)
    if args.what == "config":
        config = resolve_config(args)
        _announce(config)
        path = save_experiment(config, output_dir / "config.json")
        sys.stdout.write(config_to_json(config).decode() + "\n")
        print(f"config: {path}")
        return EXIT_OK

    if args.archive is None:
        raise ValueError("export --what traces requires --archive")
    _reject_config_flags(args)
    model, _, seed = _load_for_evaluation(args)
    digest = _announce(model.config)
    model = prepare_for_evaluation(model, settings.evaluation.precision)
    protocol = model.config.protocol
    channels = ChannelPair.from_snrs(
        args.snr_ff if args.snr_ff is not None else protocol.snr_ff_db,
        args.snr_fb if args.snr_fb is not None else protocol.snr_fb_db,
    )
    rng = make_rng(derive_seed(seed, "traces"), settings.device)
    bits = random_messages(args.episodes, protocol.K, rng)
    with torch.no_grad():
        trace = run_episode(bits, model, channels, rng=rng, mode=NormMode.FROZEN)
    path = dump_traces(output_dir / "traces.jsonl", trace.to_records(digest, seed))
    print(f"traces: {path}")
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================


def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="Experiment config JSON")
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a config field (repeatable), e.g. training.lr_init=0.0005",
    )
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument(
        "--output-dir",
        type=Path,
        default=settings.output_dir,
        help="Output directory (default: FBENGINE_OUTPUT_DIR)",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("--json-logs", action="store_true", help="JSON log lines")
    return common


def _evaluation_flags(parser: argparse.ArgumentParser, archive_flag: bool = True) -> None:
    if archive_flag:
        parser.add_argument("--archive", type=Path, required=True, help="Weight archive")
    parser.add_argument("--snr-fb", type=float, help="Feedback SNR in dB")
    parser.add_argument("--min-errors", type=int, help="Block errors to collect (default 100)")
    parser.add_argument("--max-trials", type=int, help="Cap on simulated messages")
    parser.add_argument("--batch-size", type=int, help="Messages per shard and round")
    parser.add_argument("--shards", type=int, help="Parallel seeded shards")
    parser.add_argument(
        "--freeze", action="store_true", help="Calibrate and freeze statistics if missing"
    )


_SNR_LIST_HELP = "Forward SNRs in dB, space or comma separated (e.g. -1,0,1,2)"


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(
        prog="feedback-engine",
        description="Transformer feedback codes over AWGN channels",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", parents=[common], help="Train a model")
    train.add_argument("--resume", type=Path, help="Checkpoint directory to continue from")
    train.add_argument("--max-batches", type=int, help="Stop after this many more batches")
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("evaluate", parents=[common], help="BLER at one SNR")
    _evaluation_flags(evaluate)
    evaluate.add_argument("--snr-ff", type=float, help="Forward SNR in dB")
    evaluate.set_defaults(handler=cmd_evaluate)

    sweep_cmd = commands.add_parser("sweep", parents=[common], help="BLER over forward SNRs")
    _evaluation_flags(sweep_cmd)
    sweep_cmd.add_argument(
        "--snr-ff", nargs="+", action=_FloatList, required=True, metavar="DB", help=_SNR_LIST_HELP
    )
    sweep_cmd.set_defaults(handler=cmd_sweep)

    compare = commands.add_parser("compare", parents=[common], help="Active vs passive BLER")
    _evaluation_flags(compare, archive_flag=False)
    compare.add_argument("--active", type=Path, required=True, help="Active-feedback archive")
    compare.add_argument("--passive", type=Path, required=True, help="Passive-feedback archive")
    compare.add_argument(
        "--snr-ff", nargs="+", action=_FloatList, required=True, metavar="DB", help=_SNR_LIST_HELP
    )
    compare.set_defaults(handler=cmd_compare)

    plot = commands.add_parser("plot", parents=[common], help="Plot BLER curves")
    plot.add_argument("results", type=Path, nargs="+", help="Results files (.csv or .jsonl)")
    plot.add_argument("--label", action="append", help="Curve label, one per file")
    plot.add_argument("--output", type=Path, help="Figure path (default: <output-dir>/bler.png)")
    plot.add_argument("--title", default="BLER vs forward SNR")
    plot.set_defaults(handler=cmd_plot)

    inspect = commands.add_parser("inspect", parents=[common], help="Describe a weight archive")
    inspect.add_argument("archive", type=Path)
    inspect.add_argument("--json", action="store_true", help="Machine-readable output")
    inspect.set_defaults(handler=cmd_inspect)

    export = commands.add_parser("export", parents=[common], help="Export config or traces")
    export.add_argument("--what", choices=["config", "traces"], default="config")
    export.add_argument("--archive", type=Path, help="Weight archive (traces)")
    export.add_argument("--episodes", type=int, default=10, help="Episodes to trace")
    export.add_argument("--snr-ff", type=float, help="Forward SNR in dB (traces)")
    export.add_argument("--snr-fb", type=float, help="Feedback SNR in dB (traces)")
    export.add_argument("--freeze", action="store_true", help="Calibrate statistics if missing")
    export.set_defaults(handler=cmd_export)

    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """
    Parse a command line; a negative comma list after a flag stays its value.

    Raises:
        ValueError: On bad usage
    """
    return build_parser().parse_args(_attach_number_lists(argv))


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the ``feedback-engine`` console script."""
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    setup_logging(
        log_level="DEBUG" if args.verbose else settings.log_level.value,
        json_logs=args.json_logs or settings.json_output,
    )
    with run_context(command=args.command):
        try:
            return int(args.handler(args))
        except FloatingPointError as exc:
            logger.error("numerical_failure", error=str(exc))
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        except ValueError as exc:
            logger.error("invalid_input", error=str(exc))
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except OSError as exc:
            logger.error("io_error", error=str(exc))
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
