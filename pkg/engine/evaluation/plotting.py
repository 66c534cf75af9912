"""BLER-versus-SNR figures from results files."""

from collections.abc import Sequence
from pathlib import Path

import matplotlib


matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from engine.evaluation.results import read_results  # noqa: E402
from shared.logging import get_logger  # noqa: E402


logger = get_logger(__name__)


def plot_bler_curves(
    result_files: Sequence[str | Path],
    output: str | Path,
    labels: Sequence[str] | None = None,
    title: str = "BLER vs forward SNR",
) -> Path:
    """
    One curve per results file, BLER on a logarithmic axis with 95% intervals.

    Zero-BLER points cannot be drawn on a log axis and are left out.

    Raises:
        ValueError: If a file holds no points or the label count does not match
    """
    if labels is not None and len(labels) != len(result_files):
        raise ValueError(f"{len(labels)} labels for {len(result_files)} results files")

    figure, axis = plt.subplots(figsize=(6.4, 4.8))
    try:
        for index, source in enumerate(result_files):
            points = sorted(read_results(source), key=lambda p: p.snr_ff_db)
            if not points:
                raise ValueError(f"results file {source} holds no points")
            shown = [p for p in points if p.bler > 0]
            label = labels[index] if labels is not None else Path(source).stem
            if not shown:
                logger.warning("plot_curve_empty", path=str(source))
                continue
            snrs = [p.snr_ff_db for p in shown]
            blers = [p.bler for p in shown]
            lower = [p.bler - p.ci95[0] for p in shown]
            upper = [p.ci95[1] - p.bler for p in shown]
            axis.errorbar(snrs, blers, yerr=[lower, upper], marker="o", capsize=3, label=label)

        axis.set_yscale("log")
        axis.set_xlabel("forward SNR (dB)")
        axis.set_ylabel("BLER")
        axis.set_title(title)
        axis.grid(True, which="both", linestyle="--", linewidth=0.5)
        axis.legend()
        figure.tight_layout()

        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        figure.savefig(output, dpi=150)
    finally:
        plt.close(figure)

    logger.info("plot_written", path=str(output), curves=len(result_files))
    return output
