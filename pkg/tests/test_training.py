"""Training loop, evaluation battery and the decoder ablation on tiny data."""
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from segdepth.data.dataset import SampleDataset
from segdepth.data.scene import generate_dataset
from segdepth.model.checkpoint import load_checkpoint
from segdepth.model.config import ConfigError, ModelConfig
from segdepth.model.network import param_spec
from segdepth.model.params import init_params
from segdepth.training.ablation import compare_variants
from segdepth.training.config import TrainConfig
from segdepth.training.evaluator import (
    MACRO_ROW,
    REPORT_CSV_NAME,
    REPORT_TEXT_NAME,
    RETRIEVAL_CSV_NAME,
    GroundTruthPredictor,
    ModelPredictor,
    compare_reports,
    evaluate,
)
from segdepth.training.trainer import FINAL_CHECKPOINT_NAME, LOSS_CURVE_NAME, SUMMARY_NAME, checkpoint_path, train

from conftest import slow_tests_enabled


@pytest.fixture(scope="module")
def tiny_dataset() -> SampleDataset:
    return SampleDataset(generate_dataset(2, 2, (16, 16), seed=0), seed=0)


@pytest.fixture(scope="module")
def eval_dataset() -> SampleDataset:
    return SampleDataset(generate_dataset(2, 2, (32, 32), seed=1))


def _train_config(**overrides) -> TrainConfig:
    values = dict(lr=1e-3, batch_size=2, steps=4, checkpoint_every=2, log_every=1)
    values.update(overrides)
    return TrainConfig(**values)


def test_run_directory(tmp_path: Path, tiny_config, tiny_dataset):
    result = train(tiny_config, _train_config(), tiny_dataset, run_dir=tmp_path)
    assert result.state.step == 4
    assert list(result.loss_curve["step"]) == [1, 2, 3, 4]
    assert np.all(np.isfinite(result.loss_curve["loss"]))

    assert (tmp_path / LOSS_CURVE_NAME).exists()
    assert (tmp_path / SUMMARY_NAME).exists()
    assert checkpoint_path(tmp_path, 2).exists()
    assert checkpoint_path(tmp_path, 4).exists()

    final = load_checkpoint(tmp_path / FINAL_CHECKPOINT_NAME)
    assert final.step == 4
    assert final.config == tiny_config
    assert final.train_values["lr"] == "0.001"
    for name in final.params:
        assert np.array_equal(final.params[name], result.state.params[name])

    assert result.summary.steps == 4
    assert result.summary.rejected_steps == 0
    assert result.summary.final_loss == pytest.approx(result.loss_curve["loss"].iloc[-1])


def test_training_is_deterministic(tiny_config, tiny_dataset):
    a = train(tiny_config, _train_config(steps=2), tiny_dataset)
    b = train(tiny_config, _train_config(steps=2), tiny_dataset)
    assert list(a.loss_curve["loss"]) == list(b.loss_curve["loss"])
    for name in a.state.params:
        assert np.array_equal(a.state.params[name], b.state.params[name])


def test_zero_learning_rate_gives_a_flat_curve(tiny_config, tiny_dataset):
    """Every batch is the whole dataset, so the loss only moves with the params."""
    result = train(tiny_config, _train_config(lr=0.0, batch_size=len(tiny_dataset), steps=3), tiny_dataset)
    losses = result.loss_curve["loss"]
    assert losses.nunique() == 1
    initial = init_params(param_spec(tiny_config), 0)
    for name in initial:
        assert np.array_equal(result.state.params[name], initial[name])


def test_resume_matches_an_uninterrupted_run(tmp_path: Path, tiny_config, tiny_dataset):
    straight = train(tiny_config, _train_config(), tiny_dataset, run_dir=tmp_path / "straight")

    first = tmp_path / "split"
    train(tiny_config, _train_config(steps=2), tiny_dataset, run_dir=first)
    resumed = train(tiny_config, _train_config(), tiny_dataset, run_dir=first, resume=first / FINAL_CHECKPOINT_NAME)

    assert resumed.state.step == 4
    assert resumed.summary.resumed_from == 2
    for name in straight.state.params:
        assert np.array_equal(resumed.state.params[name], straight.state.params[name]), name
    assert list(resumed.loss_curve["step"]) == [1, 2, 3, 4]
    assert np.allclose(resumed.loss_curve["loss"], straight.loss_curve["loss"], rtol=1e-7)


def test_resume_with_another_model(tmp_path: Path, tiny_config, tiny_dataset):
    train(tiny_config, _train_config(steps=1), tiny_dataset, run_dir=tmp_path)
    other = replace(tiny_config, width=16)
    with pytest.raises(ConfigError):
        train(other, _train_config(), tiny_dataset, resume=tmp_path / FINAL_CHECKPOINT_NAME)


def test_dataset_size_mismatch(tiny_config, eval_dataset):
    with pytest.raises(ConfigError):
        train(tiny_config, _train_config(augment=False), eval_dataset)


def test_augmented_training_crops_larger_samples(tiny_config, eval_dataset):
    result = train(tiny_config, _train_config(steps=1, augment=True), eval_dataset)
    assert result.state.step == 1


def test_ground_truth_is_perfect(tmp_path: Path, eval_dataset):
    report = evaluate(GroundTruthPredictor(), eval_dataset)
    assert len(report.rows) == len(eval_dataset) + 1
    assert report.rows["stem"].iloc[-1] == MACRO_ROW
    assert report.retrieval is None

    macro = report.macro
    assert macro["abs_rel"] == 0
    assert macro["rmse"] == 0
    assert macro["delta1"] == 1
    assert macro["segment_abs_rel"] == 0
    assert macro["miou_l0"] == pytest.approx(1.0)
    assert macro["fscore_l0"] == pytest.approx(1.0)
    assert macro["chamfer_precision"] == 0
    assert macro["chamfer_recall"] == 0
    if "eps_a" in macro:
        assert macro["eps_a"] == 0
        assert macro["eps_c"] == 0

    report.write(tmp_path)
    written = pd.read_csv(tmp_path / REPORT_CSV_NAME)
    assert len(written) == len(eval_dataset) + 1
    text = (tmp_path / REPORT_TEXT_NAME).read_text()
    assert "abs_rel=0.000000\n" in text
    assert f"samples={len(eval_dataset)}\n" in text
    assert not (tmp_path / RETRIEVAL_CSV_NAME).exists()


def test_model_report(tmp_path: Path, tiny_config, tiny_dataset):
    params = init_params(param_spec(tiny_config), 0)
    report = evaluate(ModelPredictor(tiny_config, params), tiny_dataset)
    assert len(report.samples) == len(tiny_dataset)
    assert {"miou_l0", "miou_l1", "miou_l2"} <= set(report.rows.columns)
    assert report.retrieval is not None
    assert set(report.retrieval["protocol"]) == {"scene", "frame"}
    assert 0 <= report.retrieval["accuracy"].min() and report.retrieval["accuracy"].max() <= 1
    assert report.retrieval_baseline == pytest.approx(1 / 3)

    report.write(tmp_path)
    assert (tmp_path / RETRIEVAL_CSV_NAME).exists()
    assert "retrieval.scene.top1=" in (tmp_path / REPORT_TEXT_NAME).read_text()

    table = compare_reports({"model": report, "gt": evaluate(GroundTruthPredictor(), tiny_dataset)})
    assert list(table["name"]) == ["model", "gt"]
    assert table.loc[1, "abs_rel"] == 0


def test_ablation_rows(tiny_config, tiny_dataset):
    result = compare_variants(tiny_config, _train_config(steps=1), tiny_dataset, seeds=(0,))
    assert list(result.runs["variant"]) == ["full", "no_unpool"]
    assert set(result.averaged().index) == {"full", "no_unpool"}
    assert isinstance(result.full_not_worse(), bool)


slow = pytest.mark.skipif(not slow_tests_enabled(), reason="Set SEGDEPTH_SLOW_TESTS environment variable to run desk-scale training runs")


@pytest.fixture(scope="module")
def desk_dataset() -> SampleDataset:
    """8 scenes × 4 frames at the desk input size."""
    return SampleDataset(generate_dataset(8, 4, (96, 96), seed=0))


@slow
def test_overfit(logger, tmp_path: Path, desk_dataset):
    """Desk preset fits the training scenes within 500 steps."""
    config = ModelConfig()
    result = train(config, TrainConfig(), desk_dataset, run_dir=tmp_path)
    assert result.summary.rejected_steps == 0
    assert result.summary.final_loss < 0.05

    report = evaluate(ModelPredictor(config, result.state.params), desk_dataset)
    assert report.macro["abs_rel"] < 0.08

    again = train(config, TrainConfig(steps=5), desk_dataset)
    assert list(again.loss_curve["loss"]) == list(result.loss_curve["loss"].iloc[:5])


@slow
def test_ablation(logger, desk_dataset):
    """Progressive unpooling is at least as good as projecting the coarsest level."""
    result = compare_variants(ModelConfig(), TrainConfig(), desk_dataset, seeds=(0, 1, 2))
    logger.info("Ablation runs:\n%s", result.runs.to_string(index=False))
    assert len(result.runs) == 6
    assert result.full_not_worse()


@slow
def test_retrieval_after_training(logger, desk_dataset):
    """Trained class tokens retrieve frames of the same scene better than chance."""
    config = ModelConfig()
    accuracies = []
    baseline = None
    for seed in (0, 1, 2):
        result = train(config, TrainConfig(seed=seed), desk_dataset)
        report = evaluate(ModelPredictor(config, result.state.params), desk_dataset)
        table = report.retrieval
        scene_top1 = table[(table["protocol"] == "scene") & (table["top_k"] == 1)]["accuracy"].iloc[0]
        accuracies.append(scene_top1)
        baseline = report.retrieval_baseline
    assert baseline == pytest.approx(3 / 31)
    assert np.mean(accuracies) > baseline
