"""The training loop.

Per step: take the seeded batch, run every sample forward on one tape, average
the SILog losses, backpropagate, clip, and apply Adam. Samples are summed in
ascending dataset index order so a run is reproducible bit for bit in 32-bit mode.

Run directory layout:

- `loss_curve.csv` columns `step,loss`
- `checkpoints/step-<n>.ckpt` at the configured cadence
- `final.ckpt`
- `summary.json`
"""
import datetime
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from segdepth.core import ops
from segdepth.core.node import NumericFailure, Tape
from segdepth.data.augment import AugmentConfig
from segdepth.data.dataset import Batch, SampleDataset
from segdepth.evaluation.depth_metrics import silog_loss
from segdepth.model.checkpoint import load_checkpoint, save_checkpoint
from segdepth.model.config import ConfigError, ModelConfig
from segdepth.model.network import compute_superpixels, forward, param_spec
from segdepth.model.params import ModelParams, init_params
from segdepth.training.config import TrainConfig
from segdepth.training.optimiser import adam_step, clip_gradients
from segdepth.training.state import TrainState, TrainSummary
from segdepth.utils.timer import timed_task
from segdepth.vision.superpixel import Superpixelation

logger = logging.getLogger(__name__)


LOSS_CURVE_NAME = "loss_curve.csv"

FINAL_CHECKPOINT_NAME = "final.ckpt"

SUMMARY_NAME = "summary.json"


@dataclass
class TrainResult:
    state: TrainState

    #: Columns step, loss
    loss_curve: pd.DataFrame

    summary: TrainSummary


def checkpoint_path(run_dir: Path, step: int) -> Path:
    return Path(run_dir) / "checkpoints" / f"step-{step:06d}.ckpt"


class SuperpixelCache:
    """S₀ per dataset sample, computed once for unaugmented training."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.cache: dict[int, Superpixelation] = {}

    def get(self, index: int, image: np.ndarray) -> Superpixelation:
        if index not in self.cache:
            self.cache[index] = compute_superpixels(image, self.config)
        return self.cache[index]


def batch_loss(params: ModelParams, config: ModelConfig, batch: Batch, superpixels: list[Superpixelation], lam: float) -> tuple[float, dict[str, np.ndarray]]:
    """Mean SILog loss of a batch and its parameter gradients.

    :raise NumericFailure:
        If the loss is not finite
    """
    tape = Tape()
    nodes = tape.watch(params.arrays)
    total = None
    for image, depth, sp in zip(batch.images, batch.depths, superpixels):
        prediction, _ = forward(image, nodes, config, sp)
        loss = silog_loss(prediction, depth, lam=lam)
        total = loss if total is None else ops.add(total, loss)
    mean = ops.mul(total, 1.0 / len(batch.images))
    tape.backward(mean)
    return float(mean.value), tape.gradients(nodes)


def check_compatible(config: ModelConfig, dataset: SampleDataset, train_config: TrainConfig):
    """:raise ConfigError: when samples cannot feed the model"""
    if dataset.size != config.input_size and not (train_config.augment and dataset.size[0] >= config.height and dataset.size[1] >= config.image_width):
        raise ConfigError(f"Dataset samples are {dataset.size[0]}x{dataset.size[1]}, the model expects {config.height}x{config.image_width}")


def _load_curve(run_dir: Optional[Path], up_to: int) -> list[dict]:
    if run_dir is None:
        return []
    path = Path(run_dir) / LOSS_CURVE_NAME
    if not path.exists():
        return []
    curve = pd.read_csv(path)
    return curve[curve["step"] <= up_to].to_dict("records")


def _write_curve(run_dir: Optional[Path], rows: list[dict]) -> pd.DataFrame:
    curve = pd.DataFrame(rows, columns=["step", "loss"])
    if run_dir is not None:
        curve.to_csv(Path(run_dir) / LOSS_CURVE_NAME, index=False, float_format="%.9g")
    return curve


def train(
        config: ModelConfig,
        train_config: TrainConfig,
        dataset: SampleDataset,
        run_dir: Optional[Path] = None,
        resume: Optional[Path] = None,
) -> TrainResult:
    """Train a model.

    :param run_dir:
        Where to write the loss curve, checkpoints and summary. Nothing is written when None.

    :param resume:
        Checkpoint to continue from. Training continues up to `train_config.steps` in total.

    :raise ConfigError:
        When the dataset does not match the model input

    :raise NumericFailure:
        When the loss becomes non-finite
    """
    check_compatible(config, dataset, train_config)
    if run_dir is not None:
        Path(run_dir).mkdir(parents=True, exist_ok=True)

    if resume is not None:
        checkpoint = load_checkpoint(resume)
        if checkpoint.config != config:
            raise ConfigError(f"Checkpoint {resume} was trained with a different model configuration")
        state = TrainState.from_checkpoint(checkpoint)
        logger.info("Resuming from %s at step %d", resume, state.step)
    else:
        state = TrainState.fresh(init_params(param_spec(config), train_config.seed))

    augment_config = None
    if train_config.augment:
        augment_config = AugmentConfig(crop_size=config.input_size)
    superpixels = SuperpixelCache(config)

    summary = TrainSummary(
        steps=state.step,
        seed=train_config.seed,
        variant=config.variant.value,
        parameters=state.params.count(),
        resumed_from=state.step if resume is not None else None,
        started_at=datetime.datetime.now(datetime.timezone.utc),
    )
    rows = _load_curve(run_dir, state.step) if resume is not None else []

    with timed_task("train", steps=train_config.steps, start=state.step, variant=config.variant.value, samples=len(dataset)):
        while state.step < train_config.steps:
            step = state.step
            batch = dataset.batch(step, train_config.batch_size, augment_config)
            if augment_config is None:
                sps = [superpixels.get(int(i), image) for i, image in zip(batch.indices, batch.images)]
            else:
                sps = [compute_superpixels(image, config) for image in batch.images]

            loss, grads = batch_loss(state.params, config, batch, sps, train_config.silog_lambda)
            grads, norm = clip_gradients(grads, train_config.grad_clip)
            try:
                state = adam_step(state, grads, train_config)
            except NumericFailure as e:
                logger.warning("Rejected step %d: %s", step + 1, e)
                summary.rejected_steps += 1
                state = TrainState(step=step + 1, params=state.params, first_moments=state.first_moments, second_moments=state.second_moments)
            state.params.assert_finite()

            rows.append({"step": state.step, "loss": loss})
            if state.step % train_config.log_every == 0 or state.step == train_config.steps:
                logger.info("Step %d/%d loss %.6f gradient norm %.4f", state.step, train_config.steps, loss, norm)

            if run_dir is not None and train_config.checkpoint_every and state.step % train_config.checkpoint_every == 0:
                path = checkpoint_path(run_dir, state.step)
                path.parent.mkdir(parents=True, exist_ok=True)
                save_checkpoint(path, state.to_checkpoint(config, train_config))
                _write_curve(run_dir, rows)

    curve = _write_curve(run_dir, rows)
    losses = curve["loss"]
    summary.steps = state.step
    summary.final_loss = float(losses.iloc[-1]) if len(losses) else None
    summary.min_loss = float(losses.min()) if len(losses) else None
    summary.finished_at = datetime.datetime.now(datetime.timezone.utc)

    if run_dir is not None:
        save_checkpoint(Path(run_dir) / FINAL_CHECKPOINT_NAME, state.to_checkpoint(config, train_config))
        summary.write(Path(run_dir) / SUMMARY_NAME)

    return TrainResult(state=state, loss_curve=curve, summary=summary)
