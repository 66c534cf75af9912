"""
Unit tests for structured logging setup.
"""

import json
from pathlib import Path

import numpy as np
import pytest
import torch

from shared.config.experiment import FeedbackMode
from shared.logging import (
    bind_context,
    clear_context,
    get_logger,
    run_context,
    setup_logging,
)


class TestLogging:
    """Tests for the structlog configuration."""

    def teardown_method(self) -> None:
        """Reset bound context between tests."""
        clear_context()

    def test_json_lines_carry_context(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that JSON logs include the event, bound context and service."""
        setup_logging(log_level="INFO", json_logs=True)
        bind_context(command="sweep", config_hash="abc123")

        get_logger("tests").info("bler_point", bler=0.25)

        line = capsys.readouterr().err.strip().splitlines()[-1]
        record = json.loads(line)
        assert record["event"] == "bler_point"
        assert record["command"] == "sweep"
        assert record["config_hash"] == "abc123"
        assert record["service"] == "feedback-engine"
        assert record["bler"] == 0.25

    def test_scalars_rendered_as_numbers(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that 0-d tensors and numpy scalars become plain numbers."""
        setup_logging(log_level="INFO", json_logs=True)

        get_logger("tests").info("train_step", loss=torch.tensor(1.5), step=np.int64(3))

        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["loss"] == 1.5
        assert record["step"] == 3

    def test_nothing_on_stdout(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that log lines never reach stdout."""
        setup_logging(log_level="INFO", json_logs=True)

        get_logger("tests").warning("bler_not_monotone")

        assert capsys.readouterr().out == ""

    def test_paths_and_enums_rendered(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that paths, enums and tuples are JSON-friendly."""
        setup_logging(log_level="INFO", json_logs=True)

        get_logger("tests").info(
            "checkpoint_saved",
            path=Path("runs/ckpt"),
            mode=FeedbackMode.PASSIVE,
            snrs=(torch.tensor(3.0), 100.0),
        )

        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["path"] == "runs/ckpt"
        assert record["mode"] == "passive"
        assert record["snrs"] == [3.0, 100.0]

    def test_unknown_level(self) -> None:
        """Test that an unknown log level is rejected."""
        with pytest.raises(ValueError, match="unknown log level"):
            setup_logging(log_level="LOUD")

    def test_run_context_restores(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that values bound inside a run disappear when it ends."""
        setup_logging(log_level="INFO", json_logs=True)
        logger = get_logger("tests")

        with run_context(command="train"):
            bind_context(config_hash="abc123")
            logger.info("inside")
        logger.info("outside")

        inside, outside = (
            json.loads(line) for line in capsys.readouterr().err.strip().splitlines()[-2:]
        )
        assert inside["command"] == "train"
        assert inside["config_hash"] == "abc123"
        assert "command" not in outside
        assert "config_hash" not in outside
        assert outside["service"] == "feedback-engine"
