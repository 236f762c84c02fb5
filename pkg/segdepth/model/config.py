"""Model configuration.

Desk-scale defaults: 96×96 input, 36 superpixels, stages 16, 8, 4, width 64,
two blocks per stage, four heads.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Tuple

from dataclasses_json import dataclass_json

from segdepth.utils.dataclass import KeyValueError, dataclass_from_key_values, dataclass_to_key_values

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Model or training configuration is invalid."""


class ModelVariant(enum.Enum):
    """Decoder variants compared in the ablation."""

    #: Progressive unpooling through every hierarchy level
    full = "full"

    #: Coarsest tokens projected to pixels directly, no progressive unpooling
    no_unpool = "no_unpool"


class SuperpixelSource(enum.Enum):
    """How S₀ is produced for an input image."""

    slic = "slic"

    grid = "grid"


@dataclass_json
@dataclass
class ModelConfig:
    """Shape and hyperparameters of one network."""

    #: Input (height, width), both divisible by 8
    input_size: Tuple[int, int] = (96, 96)

    #: Superpixels requested for S₀
    n0: int = 36

    #: Coarse token count after each pooling stage, strictly decreasing
    stage_sizes: list[int] = field(default_factory=lambda: [16, 8, 4])

    #: Transformer blocks before each pooling step and per decoder level
    blocks_per_stage: int = 2

    #: Token width d
    width: int = 64

    #: Attention heads, must divide width
    heads: int = 4

    #: Soft assignment temperature
    tau: float = 1.0

    #: Channels of the fusion head
    head_channels: int = 32

    #: Output clamp in metres
    depth_range: Tuple[float, float] = (1e-3, 10.0)

    variant: ModelVariant = ModelVariant.full

    #: MLP hidden width as a multiple of width
    mlp_ratio: int = 4

    superpixels: SuperpixelSource = SuperpixelSource.slic

    #: SLIC iterations
    superpixel_iters: int = 10

    #: SLIC compactness
    compactness: float = 10.0

    def __post_init__(self):
        self.input_size = tuple(self.input_size)
        self.stage_sizes = list(self.stage_sizes)
        self.depth_range = tuple(self.depth_range)
        self.validate()

    @property
    def height(self) -> int:
        return self.input_size[0]

    @property
    def image_width(self) -> int:
        return self.input_size[1]

    @property
    def levels(self) -> int:
        """l_max, the number of pooling stages."""
        return len(self.stage_sizes)

    @property
    def grid_size(self) -> tuple[int, int]:
        """Stride-8 token grid."""
        return self.height // 8, self.image_width // 8

    @property
    def stem_channels(self) -> int:
        """Channels of the stride-4 tap."""
        return self.width // 2

    def validate(self):
        """Check the configuration invariants.

        :raise ConfigError:
            On any violation
        """
        h, w = self.input_size
        if h < 8 or w < 8 or h % 8 or w % 8:
            raise ConfigError(f"Input size {h}x{w} must be divisible by 8")
        if not self.stage_sizes:
            raise ConfigError("Need at least one pooling stage")
        if any(b <= a for a, b in zip(self.stage_sizes, self.stage_sizes[1:])) or self.stage_sizes[-1] < 1:
            raise ConfigError(f"Stage sizes must be strictly decreasing and positive: {self.stage_sizes}")
        if self.n0 <= self.stage_sizes[0]:
            raise ConfigError(f"n0 {self.n0} must exceed the first stage size {self.stage_sizes[0]}")
        if self.n0 > h * w:
            raise ConfigError(f"n0 {self.n0} exceeds the pixel count of {h}x{w}")
        if self.width % 4:
            raise ConfigError(f"Width {self.width} must be divisible by 4 for positional embeddings")
        if self.heads < 1 or self.width % self.heads:
            raise ConfigError(f"Width {self.width} must be divisible by heads {self.heads}")
        if self.blocks_per_stage < 1 or self.head_channels < 1 or self.mlp_ratio < 1:
            raise ConfigError("Block count, head channels and MLP ratio must be positive")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        low, high = self.depth_range
        if not (0 < low < high):
            raise ConfigError(f"Bad depth range {self.depth_range}")

    def to_key_values(self) -> dict[str, str]:
        return dataclass_to_key_values(self)

    @classmethod
    def from_key_values(cls, values: dict[str, str], base: "ModelConfig" = None) -> "ModelConfig":
        """Parse key=value entries.

        :raise ConfigError:
            Unknown keys, bad values or violated invariants
        """
        try:
            return dataclass_from_key_values(cls, values, base=base)
        except KeyValueError as e:
            raise ConfigError(str(e)) from e

    def with_variant(self, variant: ModelVariant) -> "ModelConfig":
        values = self.to_key_values()
        values["variant"] = variant.value
        return ModelConfig.from_key_values(values)
