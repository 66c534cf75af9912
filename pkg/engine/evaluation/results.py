"""
Result files: CSV and JSON lines, one BlerPoint (or comparison row) per
line, columns in a fixed order.
"""

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import orjson
from pydantic import BaseModel, ValidationError

from engine.evaluation.bler import BlerPoint


RESULT_COLUMNS = (
    "snr_ff_db",
    "snr_fb_db",
    "trials",
    "block_errors",
    "bler",
    "ci95_low",
    "ci95_high",
    "per_block_error_rate",
    "blocks_per_message",
    "wall_time",
    "cap_hit",
    "config_hash",
    "archive_hash",
    "evaluation_key",
)


def point_to_row(point: BlerPoint) -> dict[str, Any]:
    data = point.model_dump()
    low, high = data.pop("ci95")
    data["ci95_low"], data["ci95_high"] = low, high
    return {column: data[column] for column in RESULT_COLUMNS}


def row_to_point(row: dict[str, str]) -> BlerPoint:
    data: dict[str, Any] = {key: value for key, value in row.items() if key in RESULT_COLUMNS}
    data["ci95"] = (float(data.pop("ci95_low")), float(data.pop("ci95_high")))
    data["cap_hit"] = str(data["cap_hit"]).lower() == "true"
    return BlerPoint.model_validate(data)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[column]) for column in columns])
    return path


def write_results_csv(path: str | Path, points: Iterable[BlerPoint]) -> Path:
    return write_csv(path, RESULT_COLUMNS, (point_to_row(p) for p in points))


def _jsonl_line(model: BaseModel) -> bytes:
    return orjson.dumps(model.model_dump(mode="json")) + b"\n"


def write_results_jsonl(path: str | Path, points: Iterable[BaseModel]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(_jsonl_line(p) for p in points))
    return path


def append_result_jsonl(path: str | Path, point: BaseModel) -> None:
    """Append one record and flush it, so an interrupted sweep keeps finished points."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("ab") as fh:
        fh.write(_jsonl_line(point))


def read_results(path: str | Path) -> list[BlerPoint]:
    """
    Load BlerPoints from a ``.csv`` or ``.jsonl`` results file.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If a line is not a valid BlerPoint
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"results file not found: {path}")
    try:
        if path.suffix == ".csv":
            with path.open(newline="") as fh:
                return [row_to_point(row) for row in csv.DictReader(fh)]
        return [
            BlerPoint.model_validate(orjson.loads(line))
            for line in path.read_bytes().splitlines()
            if line.strip()
        ]
    except (orjson.JSONDecodeError, ValidationError, KeyError) as exc:
        raise ValueError(f"malformed results file {path}: {exc}") from exc


def format_table(points: Sequence[BlerPoint]) -> str:
    """Fixed-width table for the terminal."""
    header = (
        f"{'snr_ff_db':>10} {'snr_fb_db':>10} {'trials':>12} {'errors':>8} "
        f"{'bler':>11} {'ci95':>25} {'cap':>4}"
    )
    lines = [header, "-" * len(header)]
    for p in points:
        ci = f"[{p.ci95[0]:.3e}, {p.ci95[1]:.3e}]"
        lines.append(
            f"{p.snr_ff_db:>10.2f} {p.snr_fb_db:>10.2f} {p.trials:>12d} {p.block_errors:>8d} "
            f"{p.bler:>11.4e} {ci:>25} {'yes' if p.cap_hit else 'no':>4}"
        )
    return "\n".join(lines)
