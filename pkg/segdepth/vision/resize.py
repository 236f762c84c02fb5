"""Bilinear resampling with half-pixel centres.

Output pixel `i` samples the input at `(i + 0.5) * n_in / n_out - 0.5`,
clamped to the input range (align-corners-false convention). Resampling is a
pair of interpolation matrices, so it runs on tape nodes and plain arrays alike.
"""
import functools

import numpy as np

from segdepth.core import ops
from segdepth.core.precision import get_dtype


@functools.lru_cache(maxsize=64)
def _interpolation_matrix(n_in: int, n_out: int, dtype_name: str) -> np.ndarray:
    result = np.zeros((n_out, n_in), dtype=dtype_name)
    if n_in == n_out:
        np.fill_diagonal(result, 1)
        result.setflags(write=False)
        return result
    source = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    source = np.clip(source, 0, n_in - 1)
    low = np.floor(source).astype(int)
    high = np.minimum(low + 1, n_in - 1)
    frac = source - low
    rows = np.arange(n_out)
    np.add.at(result, (rows, low), 1 - frac)
    np.add.at(result, (rows, high), frac)
    result.setflags(write=False)
    return result


def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """n_out×n_in matrix resampling one axis. Rows sum to one."""
    assert n_in >= 1 and n_out >= 1, f"Sizes must be positive, got {n_in} -> {n_out}"
    return _interpolation_matrix(n_in, n_out, get_dtype().name)


def resize_bilinear(raster: ops.Operand, new_size: tuple[int, int]):
    """Resize an h×w or h×w×c raster.

    :param new_size:
        Output (height, width)
    """
    value = ops.value_of(raster)
    assert value.ndim in (2, 3), f"Expected h×w or h×w×c raster, got {value.shape}"
    height, width = value.shape[:2]
    new_height, new_width = new_size
    if (height, width) == (new_height, new_width):
        return raster

    rows = interpolation_matrix(height, new_height)
    columns = interpolation_matrix(width, new_width)

    if value.ndim == 2:
        return ops.matmul(ops.matmul(rows, raster), columns.T)

    channels = value.shape[2]
    flat = ops.reshape(raster, (height, width * channels))
    flat = ops.matmul(rows, flat)
    swapped = ops.transpose(ops.reshape(flat, (new_height, width, channels)), (1, 0, 2))
    swapped = ops.matmul(columns, ops.reshape(swapped, (width, new_height * channels)))
    return ops.transpose(ops.reshape(swapped, (new_width, new_height, channels)), (1, 0, 2))
