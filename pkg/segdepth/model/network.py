"""Segment-hierarchy encoder-decoder for depth.

Encoder: stem → superpixel tokens → [transformer blocks → pooling] per stage.
Decoder: [unpool → skip fusion → transformer blocks] per level back to the
finest tokens, per-level spatial maps on the stride-8 grid, fusion with the
stem taps, ×8 bilinear upsampling and a positive clamped depth output.

The `no_unpool` variant skips progressive unpooling and projects the
coarsest tokens straight to the grid.
"""
import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from segdepth.core import ops
from segdepth.core.ops import Operand
from segdepth.model.backbone import StemFeatures, downsample_labels, init_segment_tokens, stem_forward, stem_spec
from segdepth.model.config import ModelConfig, ModelVariant, SuperpixelSource
from segdepth.model.hierarchy import (
    LevelState,
    compose_segmentation,
    compose_soft,
    farthest_point_sample,
    pool_tokens,
    project_spatial,
    skip_fuse,
    soft_assign,
    unpool_tokens,
)
from segdepth.model.layers import (
    Init,
    ParamSpec,
    Params,
    Spec,
    attention_block_spec,
    block_stack,
    conv2d,
    conv2d_spec,
    linear,
    linear_spec,
    mlp,
    mlp_spec,
)
from segdepth.vision.partition import SegmentationMap
from segdepth.vision.resize import resize_bilinear
from segdepth.vision.superpixel import Superpixelation, generate_superpixels, grid_superpixels

logger = logging.getLogger(__name__)


@dataclass
class ForwardTrace:
    """Everything the decoder needs to reverse the hierarchy."""

    #: Levels 0..l_max
    levels: list[LevelState]

    f_conv: StemFeatures

    #: 1×d class token after the last encoder stage
    class_token_final: Operand

    #: Level-0 segment id per stride-8 cell
    grid_labels: np.ndarray

    superpixels: Superpixelation

    @property
    def l_max(self) -> int:
        return len(self.levels) - 1

    def token_counts(self) -> list[int]:
        return [level.n_segments for level in self.levels]

    def segmentations(self) -> list[SegmentationMap]:
        return [level.s for level in self.levels]

    def embedding(self) -> np.ndarray:
        """Image embedding for retrieval, the final class token."""
        return np.asarray(ops.value_of(self.class_token_final)).reshape(-1)


def param_spec(config: ModelConfig) -> Spec:
    """Declare every parameter of a configuration."""
    d = config.width
    hidden = config.mlp_ratio * d
    levels = config.levels
    spec: Spec = stem_spec(d)
    spec["encoder.class_token"] = ParamSpec((1, d))

    for stage in range(levels):
        for block in range(config.blocks_per_stage):
            spec |= attention_block_spec(f"encoder.stage{stage}.block{block}", d, config.mlp_ratio)
    for level in range(1, levels + 1):
        spec |= mlp_spec(f"encoder.pool{level}.mlp", d, hidden)

    if config.variant == ModelVariant.full:
        for level in range(levels - 1, -1, -1):
            spec |= mlp_spec(f"decoder.fuse{level}.mlp", d, hidden)
            for block in range(config.blocks_per_stage):
                spec |= attention_block_spec(f"decoder.level{level}.block{block}", d, config.mlp_ratio)
        for level in range(levels + 1):
            spec |= linear_spec(f"head.proj{level}", d, config.head_channels)
    else:
        for block in range(config.blocks_per_stage):
            spec |= attention_block_spec(f"decoder.coarse.block{block}", d, config.mlp_ratio)
        spec |= linear_spec("head.proj", d, config.head_channels)

    fused_channels = config.head_channels + d + config.stem_channels
    spec |= conv2d_spec("head.conv1", 3, fused_channels, config.head_channels)
    spec |= conv2d_spec("head.conv2", 3, config.head_channels, 1, init=Init.zeros)
    return spec


def compute_superpixels(image: np.ndarray, config: ModelConfig) -> Superpixelation:
    """S₀ for an input image under the configured method."""
    image = np.asarray(ops.value_of(image))
    height, width = image.shape[:2]
    if config.superpixels == SuperpixelSource.grid:
        return grid_superpixels(height, width, config.n0)
    return generate_superpixels(image, config.n0, iters=config.superpixel_iters, compactness=config.compactness)


def _strip(tokens: Operand) -> tuple[Operand, Operand]:
    return tokens[0:1], tokens[1:]


def encode(image: Operand, params: Params, config: ModelConfig, superpixels: Optional[Superpixelation] = None) -> ForwardTrace:
    """Run the encoder and record the hierarchy.

    :param superpixels:
        Precomputed S₀. Computed from the image when not given.
    """
    shape = ops.value_of(image).shape
    assert shape == (*config.input_size, 3), f"Image shape {shape} does not match config input {config.input_size}"
    if superpixels is None:
        superpixels = compute_superpixels(image, config)
    assert superpixels.shape == config.input_size, f"Superpixels {superpixels.shape} do not match input {config.input_size}"

    features = stem_forward(image, params)
    grid_labels = downsample_labels(superpixels.labels, 8)
    tokens = init_segment_tokens(features.f8, grid_labels, superpixels.n_segments, class_token=params["encoder.class_token"])
    class_token = tokens.class_token()

    levels: list[LevelState] = []
    partition = SegmentationMap(labels=superpixels.labels, n_segments=superpixels.n_segments)
    z = tokens.segments()
    p = None
    seeds = None
    for level in range(config.levels + 1):
        if level > 0:
            previous = levels[-1]
            wanted = config.stage_sizes[level - 1]
            k = min(wanted, previous.n_segments)
            if k < wanted:
                logger.warning("Level %d has only %d segments to pool into %d", level - 1, previous.n_segments, wanted)
            seeds = farthest_point_sample(ops.value_of(previous.z_out), k)
            z_init = ops.index(previous.z_out, np.asarray(seeds))
            p = soft_assign(previous.z_out, z_init, config.tau)
            z = pool_tokens(previous.z_out, z_init, p, functools.partial(mlp, params, f"encoder.pool{level}.mlp"))
            partition = compose_segmentation(previous.s, p)

        if level < config.levels:
            stacked = ops.concat([class_token, z], axis=0)
            stacked = block_stack(stacked, params, f"encoder.stage{level}", config.blocks_per_stage, config.heads)
            class_token, z_out = _strip(stacked)
        else:
            z_out = z

        levels.append(LevelState(z=z, z_out=z_out, s=partition, p=p, seeds=seeds))

    return ForwardTrace(
        levels=levels,
        f_conv=features,
        class_token_final=class_token,
        grid_labels=grid_labels,
        superpixels=superpixels,
    )


def decoder_tokens(trace: ForwardTrace, params: Params, config: ModelConfig) -> dict[int, Operand]:
    """Decoder tokens Z'_l per level that feeds the fusion head."""
    class_token = trace.class_token_final
    coarsest = trace.levels[-1]

    if config.variant == ModelVariant.no_unpool:
        stacked = ops.concat([class_token, coarsest.z_out], axis=0)
        stacked = block_stack(stacked, params, "decoder.coarse", config.blocks_per_stage, config.heads)
        return {trace.l_max: _strip(stacked)[1]}

    result = {trace.l_max: coarsest.z_out}
    z = coarsest.z_out
    for level in range(trace.l_max - 1, -1, -1):
        unpooled = unpool_tokens(z, trace.levels[level + 1].p)
        fused = skip_fuse(unpooled, trace.levels[level].z_out, functools.partial(mlp, params, f"decoder.fuse{level}.mlp"))
        stacked = ops.concat([class_token, fused], axis=0)
        stacked = block_stack(stacked, params, f"decoder.level{level}", config.blocks_per_stage, config.heads)
        class_token, z = _strip(stacked)
        result[level] = z
    return result


def assignment_chain(trace: ForwardTrace, level: int) -> Operand:
    """P_(0→l) for a traced forward pass."""
    return compose_soft([trace.levels[i].p for i in range(1, level + 1)], n0=trace.levels[0].n_segments)


def spatial_maps(trace: ForwardTrace, tokens: dict[int, Operand]) -> dict[int, Operand]:
    """F_l on the stride-8 grid for every decoded level, cells×d."""
    return {level: project_spatial(trace.grid_labels, assignment_chain(trace, level), z) for level, z in tokens.items()}


def decode(trace: ForwardTrace, params: Params, config: ModelConfig):
    """Reverse the hierarchy and predict depth.

    :return:
        h×w depth in metres, clamped to the configured range
    """
    assert trace.l_max == config.levels, f"Trace has {trace.l_max} levels, config {config.levels}"
    rows, columns = config.grid_size
    maps = spatial_maps(trace, decoder_tokens(trace, params, config))

    fused = None
    for level, spatial in sorted(maps.items()):
        name = "head.proj" if config.variant == ModelVariant.no_unpool else f"head.proj{level}"
        projected = linear(params, name, spatial)
        fused = projected if fused is None else ops.add(fused, projected)
    fused = ops.reshape(fused, (rows, columns, config.head_channels))

    f4 = resize_bilinear(trace.f_conv.f4, (rows, columns))
    x = ops.concat([fused, trace.f_conv.f8, f4], axis=2)
    x = ops.gelu(conv2d(params, "head.conv1", x))
    x = conv2d(params, "head.conv2", x)
    x = resize_bilinear(ops.reshape(x, (rows, columns)), config.input_size)
    low, high = config.depth_range
    return ops.clip(ops.softplus(x), low, high)


def forward(image: Operand, params: Params, config: ModelConfig, superpixels: Optional[Superpixelation] = None):
    """Encode and decode one image.

    :return:
        Tuple (depth, trace)
    """
    trace = encode(image, params, config, superpixels)
    return decode(trace, params, config), trace


def predict(image: np.ndarray, params: Params, config: ModelConfig, superpixels: Optional[Superpixelation] = None) -> tuple[np.ndarray, ForwardTrace]:
    """Forward pass without gradient tracking."""
    depth, trace = forward(image, params, config, superpixels)
    return np.asarray(ops.value_of(depth)), trace
