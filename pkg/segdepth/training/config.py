"""Training configuration.

Desk defaults: batch 4, 500 steps, Adam at 5e-5 with betas (0.9, 0.999).
No learning rate schedule and no weight decay.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

from dataclasses_json import dataclass_json

from segdepth.model.config import ConfigError
from segdepth.utils.dataclass import KeyValueError, dataclass_from_key_values, dataclass_to_key_values


@dataclass_json
@dataclass
class TrainConfig:
    """Optimiser and loop settings."""

    lr: float = 5e-5

    betas: Tuple[float, float] = (0.9, 0.999)

    eps: float = 1e-8

    batch_size: int = 4

    steps: int = 500

    seed: int = 0

    #: λ of the SILog loss
    silog_lambda: float = 0.85

    #: Write a checkpoint every this many steps, 0 only writes the final one
    checkpoint_every: int = 100

    #: Global gradient norm clip, None disables clipping
    grad_clip: Optional[float] = 10.0

    #: Log the loss every this many steps
    log_every: int = 10

    #: Apply random flips, photometric jitter and crops
    augment: bool = False

    def __post_init__(self):
        self.betas = tuple(self.betas)
        self.validate()

    def validate(self):
        """:raise ConfigError: on out-of-range values"""
        if not self.lr >= 0:
            raise ConfigError(f"Learning rate must be non-negative, got {self.lr}")
        if not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"Betas must be in [0, 1), got {self.betas}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError(f"Bad batch size {self.batch_size} or step count {self.steps}")
        if self.checkpoint_every < 0 or self.log_every < 1:
            raise ConfigError("checkpoint_every must be non-negative and log_every positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f"Gradient clip must be positive, got {self.grad_clip}")

    def to_key_values(self) -> dict[str, str]:
        return dataclass_to_key_values(self)

    @classmethod
    def from_key_values(cls, values: dict[str, str], base: "TrainConfig" = None) -> "TrainConfig":
        """:raise ConfigError: on unknown keys or bad values"""
        try:
            return dataclass_from_key_values(cls, values, base=base)
        except KeyValueError as e:
            raise ConfigError(str(e)) from e
