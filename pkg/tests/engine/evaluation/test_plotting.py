"""
Tests for BLER plots.
"""

from pathlib import Path

import pytest

from engine.evaluation import plot_bler_curves, write_results_jsonl
from tests.engine.evaluation.test_results import make_point


class TestPlotBlerCurves:
    """Tests for BLER-versus-SNR figures."""

    def test_writes_png(self, tmp_path: Path) -> None:
        """Test that two curves are rendered to a PNG file."""
        active = write_results_jsonl(
            tmp_path / "active.jsonl", [make_point(0.0, 0.2), make_point(1.0, 0.05)]
        )
        passive = write_results_jsonl(
            tmp_path / "passive.jsonl", [make_point(0.0, 0.3), make_point(1.0, 0.0)]
        )

        output = plot_bler_curves([active, passive], tmp_path / "plots" / "bler.png")

        assert output.is_file()
        assert output.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_empty_results(self, tmp_path: Path) -> None:
        """Test that a results file without points is an error."""
        empty = tmp_path / "empty.jsonl"
        empty.write_bytes(b"")

        with pytest.raises(ValueError, match="no points"):
            plot_bler_curves([empty], tmp_path / "bler.png")

    def test_label_count(self, tmp_path: Path) -> None:
        """Test that labels must match the results files one to one."""
        path = write_results_jsonl(tmp_path / "a.jsonl", [make_point(0.0)])

        with pytest.raises(ValueError, match="labels"):
            plot_bler_curves([path], tmp_path / "bler.png", labels=["a", "b"])
