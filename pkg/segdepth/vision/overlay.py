"""Colour rasters for inspecting predictions."""
import functools

import numpy as np
from matplotlib import colormaps

from segdepth.core.rng import Rng
from segdepth.vision.partition import SegmentationMap

#: Boundary pixels are painted in this colour
BOUNDARY_COLOUR = (1.0, 0.0, 0.0)

COLORMAP_NAME = "turbo"


@functools.lru_cache(maxsize=1)
def colormap_table() -> np.ndarray:
    """256×3 uint8 lookup table of the depth colormap."""
    table = colormaps[COLORMAP_NAME](np.linspace(0, 1, 256))[:, :3]
    table = np.round(table * 255).astype(np.uint8)
    table.setflags(write=False)
    return table


def colorize_depth(depth: np.ndarray, depth_range: tuple[float, float] = None) -> np.ndarray:
    """Map depth to colours, near is blue.

    :param depth_range:
        Values mapped to the ends of the table. Defaults to the raster's min and max.

    :return:
        h×w×3 uint8
    """
    depth = np.asarray(depth, dtype=np.float64)
    low, high = depth_range or (float(depth.min()), float(depth.max()))
    span = high - low
    scaled = np.zeros_like(depth) if span <= 0 else (np.clip(depth, low, high) - low) / span
    return colormap_table()[np.round(scaled * 255).astype(np.int64)]


def boundary_overlay(image: np.ndarray, segmentation: SegmentationMap, colour: tuple[float, float, float] = BOUNDARY_COLOUR) -> np.ndarray:
    """Paint segment boundaries over a float image."""
    assert image.shape[:2] == segmentation.shape, f"Image {image.shape} and segmentation {segmentation.shape} differ"
    result = np.array(image, dtype=np.float32, copy=True)
    result[segmentation.boundaries()] = colour
    return result


def mask_image(mask: np.ndarray) -> np.ndarray:
    """White on black rendering of a boolean mask."""
    return np.repeat(mask[..., None].astype(np.float32), 3, axis=2)


def segment_palette(n_segments: int, seed: int = 0) -> np.ndarray:
    """Fixed random colour per segment id, n×3 uint8."""
    return Rng(seed).child("palette").integers(32, 256, size=(n_segments, 3)).astype(np.uint8)
