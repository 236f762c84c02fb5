"""Network building blocks.

Parameters live in one flat name → array mapping. Each block has a
`*_spec` function declaring the parameters it reads under a name prefix and a
forward function taking that mapping. Forward functions work on tape nodes
and plain arrays alike.
"""
import enum
import functools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from segdepth.core import ops
from segdepth.core.ops import Operand

#: Parameter name → array or tape node
Params = Mapping[str, Operand]


class Init(enum.Enum):
    """How a parameter tensor starts out."""

    #: Truncated normal, σ=0.02
    normal = "normal"

    zeros = "zeros"

    ones = "ones"


@dataclass(frozen=True)
class ParamSpec:
    shape: tuple[int, ...]
    init: Init = Init.normal


#: Parameter name → declaration
Spec = dict[str, ParamSpec]


def linear_spec(prefix: str, fan_in: int, fan_out: int, init: Init = Init.normal) -> Spec:
    return {
        f"{prefix}.weight": ParamSpec((fan_in, fan_out), init),
        f"{prefix}.bias": ParamSpec((fan_out,), Init.zeros),
    }


def linear(p: Params, prefix: str, x: Operand):
    return ops.add(ops.matmul(x, p[f"{prefix}.weight"]), p[f"{prefix}.bias"])


def mlp_spec(prefix: str, width: int, hidden: int) -> Spec:
    return linear_spec(f"{prefix}.fc1", width, hidden) | linear_spec(f"{prefix}.fc2", hidden, width)


def mlp(p: Params, prefix: str, x: Operand):
    """Two linear layers with GELU between."""
    return linear(p, f"{prefix}.fc2", ops.gelu(linear(p, f"{prefix}.fc1", x)))


def layer_norm_spec(prefix: str, width: int) -> Spec:
    return {
        f"{prefix}.gain": ParamSpec((width,), Init.ones),
        f"{prefix}.bias": ParamSpec((width,), Init.zeros),
    }


def norm(p: Params, prefix: str, x: Operand):
    return ops.layer_norm(x, p[f"{prefix}.gain"], p[f"{prefix}.bias"])


def attention_block_spec(prefix: str, width: int, mlp_ratio: int = 4) -> Spec:
    return (
        layer_norm_spec(f"{prefix}.norm1", width)
        | linear_spec(f"{prefix}.qkv", width, 3 * width)
        | linear_spec(f"{prefix}.proj", width, width)
        | layer_norm_spec(f"{prefix}.norm2", width)
        | mlp_spec(f"{prefix}.mlp", width, mlp_ratio * width)
    )


def attention_block(tokens: Operand, p: Params, prefix: str, heads: int):
    """Pre-norm multi-head self-attention and MLP, both residual.

    :param tokens:
        n×d token matrix

    :return:
        n×d token matrix
    """
    n, width = ops.value_of(tokens).shape
    assert width % heads == 0, f"Width {width} not divisible by {heads} heads"
    qkv_weight = ops.value_of(p[f"{prefix}.qkv.weight"])
    assert qkv_weight.shape == (width, 3 * width), f"{prefix}.qkv.weight has shape {qkv_weight.shape}, tokens have width {width}"
    head_width = width // heads

    h = norm(p, f"{prefix}.norm1", tokens)
    qkv = linear(p, f"{prefix}.qkv", h)
    # (n, 3d) -> (3, heads, n, head_width)
    qkv = ops.transpose(ops.reshape(qkv, (n, 3, heads, head_width)), (1, 2, 0, 3))
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(head_width))
    weights = ops.softmax_rows(scores)
    mixed = ops.matmul(weights, v)
    mixed = ops.reshape(ops.transpose(mixed, (1, 0, 2)), (n, width))
    x = ops.add(tokens, linear(p, f"{prefix}.proj", mixed))

    return ops.add(x, mlp(p, f"{prefix}.mlp", norm(p, f"{prefix}.norm2", x)))


def block_stack(tokens: Operand, p: Params, prefix: str, blocks: int, heads: int):
    for i in range(blocks):
        tokens = attention_block(tokens, p, f"{prefix}.block{i}", heads)
    return tokens


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    pad = kernel // 2
    return (size + 2 * pad - kernel) // stride + 1


@functools.lru_cache(maxsize=64)
def conv_gather_index(height: int, width: int, channels: int, kernel: int, stride: int) -> np.ndarray:
    """Flat indices turning an h×w×c raster into convolution patches.

    Borders replicate the edge pixel.

    :return:
        (out_h·out_w)×(kernel·kernel·channels) index array, patch columns ordered (row tap, column tap, channel)
    """
    pad = kernel // 2
    out_h = conv_output_size(height, kernel, stride)
    out_w = conv_output_size(width, kernel, stride)
    taps = np.arange(kernel) - pad
    rows = np.clip(np.arange(out_h)[:, None] * stride + taps[None, :], 0, height - 1)
    cols = np.clip(np.arange(out_w)[:, None] * stride + taps[None, :], 0, width - 1)
    # out_h, out_w, tap_r, tap_c, channel
    index = (
        (rows[:, None, :, None, None] * width + cols[None, :, None, :, None]) * channels
        + np.arange(channels)[None, None, None, None, :]
    )
    index = index.reshape(out_h * out_w, kernel * kernel * channels)
    index.setflags(write=False)
    return index


def conv2d_spec(prefix: str, kernel: int, channels_in: int, channels_out: int, init: Init = Init.normal) -> Spec:
    return {
        f"{prefix}.weight": ParamSpec((kernel, kernel, channels_in, channels_out), init),
        f"{prefix}.bias": ParamSpec((channels_out,), Init.zeros),
    }


def conv2d(p: Params, prefix: str, x: Operand, stride: int = 1):
    """2-D convolution over an h×w×c raster, edge-replicate padding."""
    height, width, channels = ops.value_of(x).shape
    weight = p[f"{prefix}.weight"]
    kernel, _, channels_in, channels_out = ops.value_of(weight).shape
    assert channels_in == channels, f"{prefix} expects {channels_in} channels, got {channels}"
    index = conv_gather_index(height, width, channels, kernel, stride)
    patches = ops.gather(x, index)
    out = ops.add(ops.matmul(patches, ops.reshape(weight, (kernel * kernel * channels_in, channels_out))), p[f"{prefix}.bias"])
    return ops.reshape(out, (conv_output_size(height, kernel, stride), conv_output_size(width, kernel, stride), channels_out))
