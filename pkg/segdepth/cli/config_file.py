"""Run configuration files.

A run configuration is a flat `key=value` file. Model keys are unprefixed,
training keys carry a `train.` prefix, the layout of the config block stored
in checkpoints:

.. code-block:: text

    # desk.env
    input_size=96x96
    stage_sizes=16,8,4
    train.lr=5e-05
    train.steps=500
"""
from pathlib import Path
from typing import Optional

from segdepth.cli.errors import UsageError
from segdepth.model.config import ModelConfig
from segdepth.training.config import TrainConfig
from segdepth.utils.dataclass import KeyValueError, parse_value, read_key_value_file

TRAIN_PREFIX = "train."


def split_run_values(values: dict[str, str]) -> tuple[dict[str, str], dict[str, str]]:
    """Separate model keys from `train.` keys."""
    model = {k: v for k, v in values.items() if not k.startswith(TRAIN_PREFIX)}
    train = {k[len(TRAIN_PREFIX):]: v for k, v in values.items() if k.startswith(TRAIN_PREFIX)}
    return model, train


def load_run_config(
        path: Optional[Path],
        model_overrides: Optional[dict[str, str]] = None,
        train_overrides: Optional[dict[str, str]] = None,
) -> tuple[ModelConfig, TrainConfig]:
    """Read a run configuration, flags win over file keys.

    :param path:
        Config file, None uses the built-in desk defaults

    :raise ConfigError:
        On unknown keys or invalid values
    """
    values = read_key_value_file(path) if path is not None else {}
    model_values, train_values = split_run_values(values)
    model_values |= {k: v for k, v in (model_overrides or {}).items() if v is not None}
    train_values |= {k: v for k, v in (train_overrides or {}).items() if v is not None}
    return ModelConfig.from_key_values(model_values), TrainConfig.from_key_values(train_values)


def parse_size(text: str) -> tuple[int, int]:
    """Parse `HxW`.

    :raise UsageError:
        On anything but two positive integers
    """
    try:
        height, width = parse_value(text, tuple[int, int])
    except KeyValueError as e:
        raise UsageError(f"Size must be HxW, got {text!r}") from e
    if height < 1 or width < 1:
        raise UsageError(f"Size must be positive, got {text!r}")
    return height, width
