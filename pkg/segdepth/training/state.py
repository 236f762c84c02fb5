"""Optimiser state and the run summary written next to checkpoints."""
import datetime
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from dataclasses_json import dataclass_json

from segdepth.model.checkpoint import Checkpoint
from segdepth.model.config import ModelConfig
from segdepth.model.params import ModelParams
from segdepth.training.config import TrainConfig


@dataclass
class TrainState:
    """Everything needed to continue training bit-exactly."""

    #: Completed optimiser steps
    step: int

    params: ModelParams

    #: Adam first moments, same names and shapes as params
    first_moments: dict[str, np.ndarray]

    #: Adam second moments
    second_moments: dict[str, np.ndarray]

    def __post_init__(self):
        for name in self.params:
            shape = self.params[name].shape
            assert self.first_moments[name].shape == shape, f"First moment of {name} has shape {self.first_moments[name].shape}, param {shape}"
            assert self.second_moments[name].shape == shape, f"Second moment of {name} has shape {self.second_moments[name].shape}, param {shape}"

    @classmethod
    def fresh(cls, params: ModelParams) -> "TrainState":
        zeros = {name: np.zeros_like(params[name]) for name in params}
        return cls(step=0, params=params, first_moments=zeros, second_moments={name: z.copy() for name, z in zeros.items()})

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "TrainState":
        """Resume state. A checkpoint without moments restarts the optimiser."""
        if checkpoint.first_moments is None or checkpoint.second_moments is None:
            state = cls.fresh(checkpoint.params)
            state.step = checkpoint.step
            return state
        return cls(
            step=checkpoint.step,
            params=checkpoint.params,
            first_moments=checkpoint.first_moments,
            second_moments=checkpoint.second_moments,
        )

    def to_checkpoint(self, config: ModelConfig, train_config: Optional[TrainConfig] = None) -> Checkpoint:
        return Checkpoint(
            config=config,
            params=self.params,
            step=self.step,
            first_moments=self.first_moments,
            second_moments=self.second_moments,
            train_values=train_config.to_key_values() if train_config else {},
        )


@dataclass_json
@dataclass
class TrainSummary:
    """Human-readable outcome of a training run, written as `summary.json`."""

    #: Steps completed at the end of the run
    steps: int

    seed: int

    variant: str

    #: Scalar parameter count
    parameters: int

    #: Loss of the last step
    final_loss: Optional[float] = None

    min_loss: Optional[float] = None

    #: Steps skipped because of non-finite gradients
    rejected_steps: int = 0

    #: Step the run resumed from, if any
    resumed_from: Optional[int] = None

    started_at: Optional[datetime.datetime] = None

    finished_at: Optional[datetime.datetime] = None

    @property
    def duration(self) -> Optional[datetime.timedelta]:
        if self.started_at is None or self.finished_at is None:
            return None
        return self.finished_at - self.started_at

    def write(self, path: Path):
        Path(path).write_text(self.to_json(indent=2), encoding="utf-8")
