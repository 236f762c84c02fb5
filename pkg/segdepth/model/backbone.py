"""Convolutional stem and segment tokenisation.

- The stem turns an h×w×3 image into feature maps at stride 4 and stride 8

- Superpixel labels are reduced to the stride-8 grid by majority vote

- Initial segment tokens average the stride-8 features (plus fixed
  sinusoidal positional embeddings) over each superpixel
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np

from segdepth.core import ops
from segdepth.core.ops import Operand
from segdepth.core.precision import get_dtype
from segdepth.model.layers import Params, Spec, conv2d, conv2d_spec

logger = logging.getLogger(__name__)


#: (name, stride) of the stem convolutions in order
STEM_LAYERS = (
    ("conv1", 2),
    ("conv2", 1),
    ("conv3", 2),
    ("conv4", 1),
    ("conv5", 2),
)


@dataclass
class StemFeatures:
    """Stem outputs used by the tokeniser and the fusion head."""

    #: (h/4)×(w/4)×(d/2)
    f4: Operand

    #: (h/8)×(w/8)×d
    f8: Operand


@dataclass
class TokenMatrix:
    """Segment tokens, optionally led by a class token in row 0."""

    tokens: Operand

    has_class_token: bool = False

    @property
    def rows(self) -> int:
        return ops.value_of(self.tokens).shape[0]

    def segments(self) -> Operand:
        """Segment rows without the class token."""
        if not self.has_class_token:
            return self.tokens
        return self.tokens[1:]

    def class_token(self) -> Operand:
        assert self.has_class_token, "No class token in this token matrix"
        return self.tokens[0:1]


def stem_channels(width: int) -> list[tuple[int, int]]:
    """(in, out) channels per stem layer."""
    quarter, half = width // 4, width // 2
    return [(3, quarter), (quarter, quarter), (quarter, half), (half, half), (half, width)]


def stem_spec(width: int) -> Spec:
    spec = {}
    for (name, _), (channels_in, channels_out) in zip(STEM_LAYERS, stem_channels(width)):
        spec |= conv2d_spec(f"stem.{name}", 3, channels_in, channels_out)
    return spec


def stem_forward(image: Operand, p: Params) -> StemFeatures:
    """Run the stem.

    :param image:
        h×w×3, h and w divisible by 8
    """
    height, width, channels = ops.value_of(image).shape
    assert channels == 3, f"Expected an RGB image, got {channels} channels"
    assert height % 8 == 0 and width % 8 == 0, f"Image size {height}x{width} must be divisible by 8"

    x = image
    f4 = None
    for i, (name, stride) in enumerate(STEM_LAYERS):
        if i > 0:
            x = ops.gelu(x)
        x = conv2d(p, f"stem.{name}", x, stride=stride)
        if name == "conv4":
            f4 = x
    return StemFeatures(f4=f4, f8=x)


@functools.lru_cache(maxsize=16)
def _pos_embed(rows: int, columns: int, width: int, dtype_name: str) -> np.ndarray:
    quarter = width // 4
    omega = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    r, c = np.meshgrid(np.arange(rows), np.arange(columns), indexing="ij")
    r_angle = r.reshape(-1, 1) * omega[None, :]
    c_angle = c.reshape(-1, 1) * omega[None, :]
    embed = np.concatenate([np.sin(r_angle), np.cos(r_angle), np.sin(c_angle), np.cos(c_angle)], axis=1)
    embed = embed.astype(dtype_name)
    embed.setflags(write=False)
    return embed


def sinusoidal_pos_embed(rows: int, columns: int, width: int) -> np.ndarray:
    """Fixed 2-D positional embeddings for a rows×columns grid.

    Channels are `[sin(r ω), cos(r ω), sin(c ω), cos(c ω)]`,
    each block `width / 4` wide with `ω_k = 10000^(-k / (width / 4))`.

    :return:
        (rows·columns)×width, row-major cell order
    """
    assert width % 4 == 0, f"Embedding width {width} must be divisible by 4"
    return _pos_embed(rows, columns, width, get_dtype().name)


def downsample_labels(labels: np.ndarray, factor: int = 8) -> np.ndarray:
    """Majority label per factor×factor window, ties to the smallest label."""
    height, width = labels.shape
    assert height % factor == 0 and width % factor == 0, f"Label raster {height}x{width} not divisible by {factor}"
    rows, columns = height // factor, width // factor
    n = int(labels.max()) + 1
    windows = labels.reshape(rows, factor, columns, factor).transpose(0, 2, 1, 3).reshape(rows * columns, factor * factor)
    offsets = np.arange(rows * columns)[:, None] * n + windows
    counts = np.bincount(offsets.ravel(), minlength=rows * columns * n).reshape(rows * columns, n)
    return np.argmax(counts, axis=1).reshape(rows, columns)


def init_segment_tokens(
        f8: Operand,
        grid_labels: np.ndarray,
        n_segments: int,
        class_token: Operand = None,
        add_positions: bool = True,
) -> TokenMatrix:
    """Average stride-8 features within each segment.

    A segment without cells on the grid gets the global mean feature.

    :param f8:
        hh×ww×d feature map

    :param grid_labels:
        hh×ww segment ids on the same grid

    :param class_token:
        1×d row prepended as token 0 when given
    """
    rows, columns, width = ops.value_of(f8).shape
    assert grid_labels.shape == (rows, columns), f"Label grid {grid_labels.shape} does not match features {rows}x{columns}"
    cells = ops.reshape(f8, (rows * columns, width))
    if add_positions:
        cells = ops.add(cells, sinusoidal_pos_embed(rows, columns, width))
    tokens = ops.segment_mean(cells, grid_labels.ravel(), n_segments)
    if class_token is None:
        return TokenMatrix(tokens, has_class_token=False)
    return TokenMatrix(ops.concat([class_token, tokens], axis=0), has_class_token=True)
