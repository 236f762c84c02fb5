"""Occlusion boundaries from depth with a Canny edge detector.

1. Min-max normalise depth to integers 0..255
2. 5×5 Gaussian blur, σ=1.4
3. 3×3 Sobel gradients and their magnitude
4. Non-maximum suppression along four quantised gradient directions
5. Double threshold, weak edges kept when 8-connected to a strong edge

The outermost pixel ring is never an edge.
"""
import logging
from typing import Optional

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)


#: Hysteresis thresholds on the gradient magnitude of the 0..255 raster
LOW_THRESHOLD = 100

HIGH_THRESHOLD = 200

GAUSSIAN_SIGMA = 1.4

GAUSSIAN_SIZE = 5

SOBEL_X = np.array([
    [-1, 0, 1],
    [-2, 0, 2],
    [-1, 0, 1],
], dtype=np.float64)

SOBEL_Y = SOBEL_X.T

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def gaussian_kernel(size: int = GAUSSIAN_SIZE, sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    """Normalised square Gaussian kernel."""
    offsets = np.arange(size) - size // 2
    yy, xx = np.meshgrid(offsets, offsets, indexing="ij")
    kernel = np.exp(-(xx ** 2 + yy ** 2) / (2 * sigma ** 2))
    return kernel / kernel.sum()


def normalise_depth(depth: np.ndarray, valid: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """Min-max normalise to integers 0..255. None for a constant raster."""
    depth = np.asarray(depth, dtype=np.float64)
    values = depth[valid] if valid is not None else depth.ravel()
    low, high = values.min(), values.max()
    if not high > low:
        return None
    scaled = np.clip((depth - low) / (high - low), 0, 1)
    return np.round(scaled * 255)


def _shift(values: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """values[y + dy, x + dx], zero outside the raster."""
    result = np.zeros_like(values)
    height, width = values.shape
    ys = slice(max(0, -dy), min(height, height - dy))
    xs = slice(max(0, -dx), min(width, width - dx))
    yd = slice(max(0, dy), min(height, height + dy))
    xd = slice(max(0, dx), min(width, width + dx))
    result[ys, xs] = values[yd, xd]
    return result


def non_maximum_suppression(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep magnitudes that peak across the edge.

    A pixel survives when it is strictly above its neighbour behind the
    gradient and at least its neighbour ahead, so a plateau two pixels wide
    keeps one pixel.
    """
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180
    # (dy, dx) of the neighbour ahead along the gradient, rows grow downwards
    directions = [
        ((angle < 22.5) | (angle >= 157.5), (0, 1)),
        ((angle >= 22.5) & (angle < 67.5), (1, 1)),
        ((angle >= 67.5) & (angle < 112.5), (1, 0)),
        ((angle >= 112.5) & (angle < 157.5), (1, -1)),
    ]
    result = np.zeros_like(magnitude)
    for selected, (dy, dx) in directions:
        ahead = _shift(magnitude, dy, dx)
        behind = _shift(magnitude, -dy, -dx)
        keep = selected & (magnitude > behind) & (magnitude >= ahead)
        result[keep] = magnitude[keep]
    return result


def hysteresis(suppressed: np.ndarray, low: float, high: float) -> np.ndarray:
    """Weak edges survive when their 8-connected component holds a strong edge."""
    weak = suppressed >= low
    strong = suppressed >= high
    components, count = ndimage.label(weak, structure=_EIGHT_CONNECTED)
    if count == 0:
        return np.zeros(suppressed.shape, dtype=bool)
    has_strong = np.zeros(count + 1, dtype=bool)
    has_strong[np.unique(components[strong])] = True
    has_strong[0] = False
    return has_strong[components]


def gradients(depth: np.ndarray, valid: Optional[np.ndarray] = None) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Sobel gradients of the smoothed, normalised depth. None for a constant raster."""
    normalised = normalise_depth(depth, valid)
    if normalised is None:
        return None
    smooth = ndimage.correlate(normalised, gaussian_kernel(), mode="nearest")
    gx = ndimage.correlate(smooth, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(smooth, SOBEL_Y, mode="nearest")
    return gx, gy


def canny_edges(
        depth: np.ndarray,
        low: float = LOW_THRESHOLD,
        high: float = HIGH_THRESHOLD,
        valid: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Binary edge mask of a depth raster.

    :param valid:
        Pixels used for the min-max range. All pixels when not given.

    :return:
        Boolean h×w mask, empty for constant depth
    """
    depth = np.asarray(depth, dtype=np.float64)
    result = np.zeros(depth.shape, dtype=bool)
    if min(depth.shape) < 3:
        return result
    grads = gradients(depth, valid)
    if grads is None:
        return result
    gx, gy = grads
    magnitude = np.hypot(gx, gy)
    suppressed = non_maximum_suppression(magnitude, gx, gy)
    edges = hysteresis(suppressed, low, high)
    result[1:-1, 1:-1] = edges[1:-1, 1:-1]
    return result
