"""
Tests for training steps and the resumable training loop.
"""

import csv
import math
import warnings
from pathlib import Path

import pytest
import torch
from pytest_mock import MockerFixture

from engine.channel import make_rng
from engine.evaluation import compare_modes, evaluate_point
from engine.networks import WeightArchive, init_model
from engine.training import (
    METRICS_COLUMNS,
    Trainer,
    build_optimizer,
    checkpoint_name,
    train_loop,
    train_step,
)
from shared.config.experiment import (
    ExperimentConfig,
    FeedbackMode,
    apply_overrides,
    desk_scale_config,
)
from shared.config.settings import EvaluationSettings
from tests.conftest import tiny_config


def _arrays_equal(a: WeightArchive, b: WeightArchive) -> bool:
    return a.arrays.keys() == b.arrays.keys() and all(
        (a.arrays[k] == b.arrays[k]).all() for k in a.arrays
    )


class TestTrainStep:
    """Tests for a single optimizer step."""

    def test_step_result(self, tiny: ExperimentConfig) -> None:
        """Test the reported learning rate, SNRs and loss of the first batch."""
        model = init_model(tiny, seed=0)
        optimizer = build_optimizer(model, tiny)

        result = train_step(model, optimizer, make_rng(0), 0, tiny)

        assert result.batch == 0
        assert result.lr == pytest.approx(tiny.training.lr_init)
        assert (result.snr_ff_db, result.snr_fb_db) == pytest.approx((3.0, 20.0))
        assert math.isfinite(result.loss)
        assert result.grad_norm >= 0

    def test_parameters_change(self, tiny: ExperimentConfig) -> None:
        """Test that a step updates the parity network."""
        model = init_model(tiny, seed=0)
        before = model.parity.map.weight.detach().clone()

        train_step(model, build_optimizer(model, tiny), make_rng(0), 0, tiny)

        assert not torch.equal(model.parity.map.weight, before)

    def test_decoupled_decay_reaches_unused_network(self) -> None:
        """Test that passive training still decays the idle feedback network."""
        config = tiny_config(FeedbackMode.PASSIVE)
        model = init_model(config, seed=0)
        before = [p.detach().clone() for p in model.feedback.parameters()]
        lr, decay = config.training.lr_init, config.training.weight_decay

        train_step(model, build_optimizer(model, config), make_rng(0), 0, config)

        for old, new in zip(before, model.feedback.parameters(), strict=True):
            assert torch.allclose(new, old * (1 - lr * decay), rtol=1e-6, atol=0)

    def test_non_finite_loss(
        self, tiny: ExperimentConfig, mocker: MockerFixture, tmp_path: Path
    ) -> None:
        """Test that a NaN loss stops training and dumps the model."""
        mocker.patch(
            "engine.training.trainer.cross_entropy_loss",
            return_value=torch.tensor(float("nan"), requires_grad=True),
        )
        model = init_model(tiny, seed=0)

        with pytest.raises(FloatingPointError, match="batch 3"):
            train_step(
                model, build_optimizer(model, tiny), make_rng(0), 3, tiny, failure_dir=tmp_path
            )

        assert (tmp_path / "failure_3.wt" / "manifest.json").is_file()
        assert (tmp_path / "failure_3.json").is_file()


class TestTrainLoop:
    """Tests for full runs, checkpoints and resumption."""

    def test_run_outputs(self, tiny: ExperimentConfig, tmp_path: Path) -> None:
        """Test config, metrics, checkpoints and the frozen final archive."""
        result = train_loop(tiny, tmp_path)

        assert (tmp_path / "config.json").is_file()
        with result.metrics.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == METRICS_COLUMNS
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2, 3]
        assert result.state.batch_index == tiny.training.total_batches
        assert (tmp_path / "checkpoints" / checkpoint_name(4)).is_dir()
        archive = WeightArchive.load(result.archive)
        assert archive.frozen
        assert archive.config_hash == result.config_hash

    def test_partial_run_has_no_final_archive(self, tiny: ExperimentConfig, tmp_path: Path) -> None:
        """Test that stopping early leaves a checkpoint but no final archive."""
        result = train_loop(tiny, tmp_path, max_batches=2)

        assert result.state.batch_index == 2
        assert not result.archive.exists()
        assert (tmp_path / "checkpoints" / checkpoint_name(2)).is_dir()

    def test_resume_is_bit_exact(self, tiny: ExperimentConfig, tmp_path: Path) -> None:
        """Test that 2 + 2 resumed batches equal 4 uninterrupted ones."""
        straight = train_loop(tiny, tmp_path / "straight")
        train_loop(tiny, tmp_path / "split", max_batches=2)
        resumed = train_loop(
            tiny,
            tmp_path / "split",
            resume=tmp_path / "split" / "checkpoints" / checkpoint_name(2),
        )

        assert _arrays_equal(
            WeightArchive.load(straight.archive), WeightArchive.load(resumed.archive)
        )
        assert straight.metrics.read_text() == resumed.metrics.read_text()
        assert resumed.state.loss_history == straight.state.loss_history

    def test_resume_rejects_other_config(self, tiny: ExperimentConfig, tmp_path: Path) -> None:
        """Test that a checkpoint cannot continue a different experiment."""
        train_loop(tiny, tmp_path / "a", max_batches=2)
        other = apply_overrides(tiny, ["training.lr_init=0.002"])

        with pytest.raises(ValueError, match="does not match"):
            Trainer(other, tmp_path / "b").resume(
                tmp_path / "a" / "checkpoints" / checkpoint_name(2)
            )

    def test_same_seed_same_run(self, tmp_path: Path) -> None:
        """Test that two runs with one seed produce identical losses and archives."""
        config = tiny_config(total_batches=10, checkpoint_interval=5)

        a = train_loop(config, tmp_path / "a")
        b = train_loop(config, tmp_path / "b")

        assert len(a.state.loss_history) == 10
        assert a.state.loss_history == b.state.loss_history
        assert WeightArchive.load(a.archive).digest() == WeightArchive.load(b.archive).digest()


@pytest.mark.slow
class TestLearning:
    """Desk-scale learning checks."""

    def test_loss_drops_below_uninformative(self, tmp_path: Path) -> None:
        """Test that a few hundred batches beat the l·m·ln 2 baseline by a margin."""
        config = tiny_config(
            total_batches=400, batch_size=256, checkpoint_interval=100, snr_ff_db=6.0
        )

        result = train_loop(config, tmp_path)

        baseline = config.protocol.l * config.protocol.m * math.log(2)
        tail = result.state.loss_history[-50:]
        assert sum(tail) / len(tail) < 0.5 * baseline

    def test_desk_scale_run(self, tmp_path: Path) -> None:
        """Test that the desk-scale protocol learns a usable code at its training SNR."""
        config = desk_scale_config()

        result = train_loop(config, tmp_path)

        history = result.state.loss_history
        assert sum(history[-100:]) / 100 < sum(history[:10]) / 10 / 5
        point = evaluate_point(
            WeightArchive.load(result.archive).to_model(),
            config.protocol.snr_ff_db,
            config.protocol.snr_fb_db,
            seed=0,
            options=EvaluationSettings(batch_size=10_000, min_errors=100),
        )
        assert point.bler < 0.1

    def test_active_not_worse_than_passive(self, tmp_path: Path) -> None:
        """Test mean BLER of active against passive feedback over three seeds; inversion warns."""
        blers: dict[str, list[float]] = {"active": [], "passive": []}
        for seed in range(3):
            archives = {}
            for mode in ("active", "passive"):
                config = apply_overrides(
                    desk_scale_config(),
                    [f"training.seed={seed}", f"protocol.feedback_mode={mode}"],
                )
                result = train_loop(config, tmp_path / f"{mode}-{seed}")
                archives[mode] = WeightArchive.load(result.archive)
            rows = compare_modes(
                archives,
                [2.0],
                20.0,
                seed,
                EvaluationSettings(batch_size=10_000, min_errors=100),
            )
            blers["active"] += [row.bler_active for row in rows]
            blers["passive"] += [row.bler_passive for row in rows]

        active, passive = (sum(v) / len(v) for v in (blers["active"], blers["passive"]))
        if active > passive:
            warnings.warn(
                f"mean BLER active={active:.3e} exceeds passive={passive:.3e}", stacklevel=1
            )
