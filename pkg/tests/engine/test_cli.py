"""
Tests for the feedback-engine command line.
"""

import csv
from pathlib import Path

import orjson
import pytest
import torch
from pytest_mock import MockerFixture

from engine.channel import make_rng
from engine.cli import EXIT_INVALID, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main, parse_args
from engine.evaluation import COMPARISON_COLUMNS, read_results
from engine.networks import FeedbackCodeModel, WeightArchive, freeze_stats, init_model
from engine.networks.archive import MANIFEST_FILE
from shared.config.experiment import (
    ExperimentConfig,
    FeedbackMode,
    config_hash,
    save_experiment,
)
from tests.conftest import tiny_config


CONFIGS = Path(__file__).resolve().parents[2] / "configs"

FAST_EVAL = ["--batch-size", "100", "--min-errors", "5", "--max-trials", "300"]


@pytest.fixture
def config_file(tiny: ExperimentConfig, tmp_path: Path) -> Path:
    """Tiny experiment config on disk."""
    return save_experiment(tiny, tmp_path / "tiny.json")


@pytest.fixture
def trained(config_file: Path, tmp_path: Path) -> Path:
    """Archive produced by `feedback-engine train` on the tiny config."""
    out = tmp_path / "run"
    assert main(["train", "--config", str(config_file), "--output-dir", str(out)]) == EXIT_OK
    return out / "final.wt"


class TestExitCodes:
    """Tests for argument errors and failure mapping."""

    def test_no_command(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a missing subcommand is invalid input."""
        assert main([]) == EXIT_INVALID
        assert "error" in capsys.readouterr().err

    def test_unknown_flag(self) -> None:
        """Test that unknown flags are invalid input."""
        assert main(["export", "--bogus"]) == EXIT_INVALID

    def test_invalid_config(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a config violating an invariant is rejected before any work."""
        code = main(["export", "--set", "protocol.K=50", "--output-dir", str(tmp_path)])

        assert code == EXIT_INVALID
        assert "K ≠ l·m" in capsys.readouterr().err

    def test_missing_archive(self, tmp_path: Path) -> None:
        """Test that a missing archive is an I/O error."""
        assert main(["inspect", str(tmp_path / "absent.wt")]) == EXIT_IO

    def test_numerical_failure(
        self, config_file: Path, tmp_path: Path, mocker: MockerFixture
    ) -> None:
        """Test that a non-finite loss maps to exit code 3."""
        mocker.patch("engine.cli.train_loop", side_effect=FloatingPointError("loss is nan"))

        code = main(["train", "--config", str(config_file), "--output-dir", str(tmp_path)])

        assert code == EXIT_NUMERIC


class TestExport:
    """Tests for config export."""

    def test_export_config(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that the resolved config is printed, saved and hashed."""
        code = main(
            [
                "export",
                "--config",
                str(CONFIGS / "desk.json"),
                "--seed",
                "5",
                "--output-dir",
                str(tmp_path),
            ]
        )

        out = capsys.readouterr().out
        saved = orjson.loads((tmp_path / "config.json").read_bytes())
        config = ExperimentConfig.model_validate(saved)
        assert code == EXIT_OK
        assert config.training.seed == 5
        assert f"config_hash: {config_hash(config)}" in out

    def test_traces_need_archive(self, tmp_path: Path) -> None:
        """Test that trace export without an archive is invalid input."""
        assert main(["export", "--what", "traces", "--output-dir", str(tmp_path)]) == EXIT_INVALID


class TestTrainedArchive:
    """End-to-end commands on a freshly trained tiny archive."""

    def test_train_outputs(self, trained: Path) -> None:
        """Test that training leaves a frozen archive, metrics and checkpoints."""
        run = trained.parent

        assert WeightArchive.load(trained).frozen
        assert (run / "metrics.csv").is_file()
        assert (run / "config.json").is_file()
        assert any((run / "checkpoints").iterdir())

    def test_inspect_json(self, trained: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the machine-readable archive description."""
        capsys.readouterr()

        assert main(["inspect", str(trained), "--json"]) == EXIT_OK

        report = orjson.loads(capsys.readouterr().out)
        assert set(report["networks"]) == {
            "parity",
            "feedback",
            "decoder",
            "parity_norm",
            "feedback_norm",
        }
        assert report["networks"]["decoder"]["layers"] == 1
        assert report["stats"]["parity_norm"]["frozen"] is True
        assert report["total_parameters"] > 0

    def test_evaluate(self, trained: Path, tmp_path: Path) -> None:
        """Test a single-point evaluation writing CSV and JSON lines."""
        out = tmp_path / "eval"

        code = main(["evaluate", "--archive", str(trained), "--output-dir", str(out), *FAST_EVAL])

        assert code == EXIT_OK
        points = read_results(out / "bler.csv")
        assert len(points) == 1
        assert points[0].snr_ff_db == 2.0
        assert points[0].archive_hash == WeightArchive.load(trained).digest()

    def test_sweep_and_plot(self, trained: Path, tmp_path: Path) -> None:
        """Test a two-point sweep followed by a plot of its results."""
        out = tmp_path / "sweep"

        code = main(
            [
                "sweep",
                "--archive",
                str(trained),
                "--snr-ff",
                "0",
                "2",
                "--output-dir",
                str(out),
                *FAST_EVAL,
            ]
        )

        assert code == EXIT_OK
        assert [p.snr_ff_db for p in read_results(out / "sweep.jsonl")] == [0.0, 2.0]
        assert main(["plot", str(out / "sweep.jsonl"), "--output-dir", str(out)]) == EXIT_OK
        assert (out / "bler.png").is_file()

    def test_export_traces(self, trained: Path, tmp_path: Path) -> None:
        """Test that trace export writes one record per episode."""
        out = tmp_path / "traces"

        code = main(
            [
                "export",
                "--what",
                "traces",
                "--archive",
                str(trained),
                "--episodes",
                "3",
                "--output-dir",
                str(out),
            ]
        )

        lines = (out / "traces.jsonl").read_bytes().splitlines()
        assert code == EXIT_OK
        assert len(lines) == 3
        assert orjson.loads(lines[0])["config_hash"] == WeightArchive.load(trained).config_hash


class TestUnfrozenArchive:
    """Tests for archives without frozen statistics."""

    @pytest.fixture
    def unfrozen(self, tiny: ExperimentConfig, tmp_path: Path) -> Path:
        """Archive of an untrained model that was never calibrated."""
        model = init_model(tiny, seed=0, dtype=torch.float64)
        return WeightArchive.from_model(model).save(tmp_path / "raw")

    def test_refused_without_freeze(self, unfrozen: Path, tmp_path: Path) -> None:
        """Test that evaluation requires frozen statistics."""
        code = main(["evaluate", "--archive", str(unfrozen), "--output-dir", str(tmp_path)])

        assert code == EXIT_INVALID

    def test_freeze_on_demand(self, unfrozen: Path, tmp_path: Path) -> None:
        """Test that --freeze calibrates before evaluating."""
        code = main(
            [
                "evaluate",
                "--archive",
                str(unfrozen),
                "--freeze",
                "--output-dir",
                str(tmp_path),
                *FAST_EVAL,
            ]
        )

        assert code == EXIT_OK
        assert (tmp_path / "bler.jsonl").is_file()


class TestCompare:
    """Tests for the active versus passive table."""

    def _archive(self, mode: FeedbackMode, path: Path, T: int = 3) -> Path:  # noqa: N803
        model = init_model(tiny_config(mode, T=T), seed=0, dtype=torch.float64)
        freeze_stats(model, 256, make_rng(1))
        return WeightArchive.from_model(model).save(path)

    def test_writes_table(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test one comparison row per forward SNR."""
        active = self._archive(FeedbackMode.ACTIVE, tmp_path / "active")
        passive = self._archive(FeedbackMode.PASSIVE, tmp_path / "passive")

        code = main(
            [
                "compare",
                "--active",
                str(active),
                "--passive",
                str(passive),
                "--snr-ff",
                "1",
                "3",
                "--output-dir",
                str(tmp_path / "out"),
                *FAST_EVAL,
            ]
        )

        assert code == EXIT_OK
        lines = (tmp_path / "out" / "comparison.csv").read_text().splitlines()
        assert lines[0].split(",") == list(COMPARISON_COLUMNS)
        assert len(lines) == 3
        assert "ratio=" in capsys.readouterr().out

    def test_same_archive_twice(self, tmp_path: Path) -> None:
        """Test that one archive on both sides gives a ratio of 1 in every row."""
        archive = self._archive(FeedbackMode.ACTIVE, tmp_path / "active")
        out = tmp_path / "out"

        code = main(
            [
                "compare",
                "--active",
                str(archive),
                "--passive",
                str(archive),
                "--snr-ff",
                "-1,1",
                "--output-dir",
                str(out),
                *FAST_EVAL,
            ]
        )

        with (out / "comparison.csv").open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert code == EXIT_OK
        assert [float(row["snr_ff_db"]) for row in rows] == [-1.0, 1.0]
        assert all(float(row["ratio"]) == 1.0 for row in rows)

    def test_mismatched_archives(self, tmp_path: Path) -> None:
        """Test that archives differing beyond the feedback mode are invalid input."""
        active = self._archive(FeedbackMode.ACTIVE, tmp_path / "active")
        passive = self._archive(FeedbackMode.PASSIVE, tmp_path / "passive", T=4)

        code = main(
            [
                "compare",
                "--active",
                str(active),
                "--passive",
                str(passive),
                "--snr-ff",
                "1",
                "--output-dir",
                str(tmp_path / "out"),
            ]
        )

        assert code == EXIT_INVALID


class TestSnrLists:
    """Tests for forward SNR lists on the command line."""

    @pytest.mark.parametrize(
        "values",
        [["-1,0,1,2"], ["-1", "0", "1", "2"], ["0,1", "2"], ["-1.5,0.5"]],
    )
    def test_forms(self, values: list[str]) -> None:
        """Test comma separated, space separated and mixed lists with negative values."""
        args = parse_args(["sweep", "--archive", "a.wt", "--snr-ff", *values, "--snr-fb", "20"])

        expected = [float(x) for value in values for x in value.split(",")]
        assert args.snr_ff == expected
        assert args.snr_fb == 20.0

    def test_not_a_number(self) -> None:
        """Test that a malformed list is invalid input."""
        with pytest.raises(ValueError, match="invalid number list"):
            parse_args(["sweep", "--archive", "a.wt", "--snr-ff", "0,x"])

    def test_sweep_comma_list(self, trained: Path, tmp_path: Path) -> None:
        """Test that `sweep --snr-ff -1,0,1,2` writes a four-row results file."""
        out = tmp_path / "sweep"

        code = main(
            [
                "sweep",
                "--archive",
                str(trained),
                "--snr-ff",
                "-1,0,1,2",
                "--output-dir",
                str(out),
                *FAST_EVAL,
            ]
        )

        assert code == EXIT_OK
        assert [p.snr_ff_db for p in read_results(out / "sweep.csv")] == [-1.0, 0.0, 1.0, 2.0]


class TestArchiveCommands:
    """Tests for commands that take their config from an archive."""

    @pytest.fixture
    def saved(self, frozen_model: FeedbackCodeModel, tmp_path: Path) -> Path:
        """Frozen tiny archive on disk."""
        return WeightArchive.from_model(frozen_model).save(tmp_path / "model")

    @pytest.mark.parametrize(
        "extra",
        [["--set", "training.lr_init=0.01"], ["--config", str(CONFIGS / "desk.json")]],
    )
    @pytest.mark.parametrize("command", ["evaluate", "sweep", "inspect"])
    def test_config_flags_refused(
        self,
        saved: Path,
        tmp_path: Path,
        capsys: pytest.CaptureFixture[str],
        command: str,
        extra: list[str],
    ) -> None:
        """Test that --config and --set are refused where the archive supplies the config."""
        target = [str(saved)] if command == "inspect" else ["--archive", str(saved)]
        snrs = ["--snr-ff", "0"] if command == "sweep" else []

        code = main([command, *target, *snrs, *extra, "--output-dir", str(tmp_path / "out")])

        assert code == EXIT_INVALID
        assert "config stored in the archive" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_inspect_bad_offset(self, saved: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that inspecting a blob with a shifted entry fails and names the entry."""
        manifest = orjson.loads((saved / MANIFEST_FILE).read_bytes())
        entry = manifest["entries"][2]
        entry["offset"] += 4
        (saved / MANIFEST_FILE).write_bytes(orjson.dumps(manifest))

        code = main(["inspect", str(saved)])

        assert code == EXIT_INVALID
        assert entry["name"] in capsys.readouterr().err
