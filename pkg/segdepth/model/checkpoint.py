"""Checkpoint files.

Layout, all integers little-endian u32:

- magic `SHEDCKPT`
- format version
- config block length and the canonical `key=value` text. Model keys are
  unprefixed, training keys carry `train.`, the step counter is `state.step`
- record count, then per record: name length, name, rank, dims,
  little-endian float32 data

Optimiser moments are stored as records `optimizer.m/<param>` and
`optimizer.v/<param>`.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from segdepth.model.config import ConfigError, ModelConfig
from segdepth.model.params import ModelParams
from segdepth.utils.dataclass import KeyValueError, format_key_values, read_key_value_text

logger = logging.getLogger(__name__)


MAGIC = b"SHEDCKPT"

VERSION = 1

FIRST_MOMENT_PREFIX = "optimizer.m/"

SECOND_MOMENT_PREFIX = "optimizer.v/"


class CheckpointFormatError(Exception):
    """Checkpoint bytes do not follow the format."""


@dataclass
class Checkpoint:
    """Model parameters with the state needed to resume training."""

    config: ModelConfig

    params: ModelParams

    step: int = 0

    #: Adam first moments by parameter name
    first_moments: Optional[dict[str, np.ndarray]] = None

    #: Adam second moments by parameter name
    second_moments: Optional[dict[str, np.ndarray]] = None

    #: Training configuration as key=value strings, without the `train.` prefix
    train_values: dict[str, str] = field(default_factory=dict)

    def config_block(self) -> str:
        values = self.config.to_key_values()
        values |= {f"train.{k}": v for k, v in self.train_values.items()}
        values["state.step"] = str(self.step)
        return format_key_values(values)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise CheckpointFormatError(f"Truncated checkpoint: need {count} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _record(name: str, array: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    header = struct.pack("<I", len(encoded)) + encoded + struct.pack("<I", array.ndim)
    header += b"".join(struct.pack("<I", dim) for dim in array.shape)
    return header + np.ascontiguousarray(array, dtype="<f4").tobytes()


def checkpoint_to_bytes(checkpoint: Checkpoint) -> bytes:
    records = [(name, checkpoint.params[name]) for name in checkpoint.params]
    for prefix, moments in ((FIRST_MOMENT_PREFIX, checkpoint.first_moments), (SECOND_MOMENT_PREFIX, checkpoint.second_moments)):
        if moments is not None:
            records += [(prefix + name, moments[name]) for name in checkpoint.params]

    block = checkpoint.config_block().encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(block)), block, struct.pack("<I", len(records))]
    for name, array in records:
        parts.append(_record(name, array))
    return b"".join(parts)


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    """Parse checkpoint bytes.

    :raise CheckpointFormatError:
        Bad magic, unknown version, truncation or an unusable config block
    """
    reader = _Reader(data)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointFormatError(f"Not a checkpoint, magic {magic!r}")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointFormatError(f"Unsupported checkpoint version {version}")

    try:
        values = read_key_value_text(reader.take(reader.u32()).decode("utf-8"))
    except (UnicodeDecodeError, KeyValueError) as e:
        raise CheckpointFormatError(f"Unreadable config block: {e}") from e

    train_values = {k[len("train."):]: v for k, v in values.items() if k.startswith("train.")}
    model_values = {k: v for k, v in values.items() if not k.startswith(("train.", "state."))}
    try:
        config = ModelConfig.from_key_values(model_values)
        step = int(values.get("state.step", "0"))
    except (ConfigError, ValueError) as e:
        raise CheckpointFormatError(f"Bad config block: {e}") from e

    params, first, second = {}, {}, {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        rank = reader.u32()
        shape = tuple(reader.u32() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64))
        array = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape).astype(np.float32)
        if name.startswith(FIRST_MOMENT_PREFIX):
            first[name[len(FIRST_MOMENT_PREFIX):]] = array
        elif name.startswith(SECOND_MOMENT_PREFIX):
            second[name[len(SECOND_MOMENT_PREFIX):]] = array
        else:
            params[name] = array

    if reader.pos != len(data):
        raise CheckpointFormatError(f"{len(data) - reader.pos} trailing bytes after the last record")

    return Checkpoint(
        config=config,
        params=ModelParams(params),
        step=step,
        first_moments=first or None,
        second_moments=second or None,
        train_values=train_values,
    )


def save_checkpoint(path: Path, checkpoint: Checkpoint):
    Path(path).write_bytes(checkpoint_to_bytes(checkpoint))
    logger.info("Wrote checkpoint %s at step %d", path, checkpoint.step)


def load_checkpoint(path: Path) -> Checkpoint:
    checkpoint = checkpoint_from_bytes(Path(path).read_bytes())
    logger.info("Loaded checkpoint %s, step %d, %d tensors", path, checkpoint.step, len(checkpoint.params))
    return checkpoint
