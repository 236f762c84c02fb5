"""Superpixel partitions.

SLIC-style local k-means in CIELAB + image coordinates:

- Cluster centres start on a regular grid at cell centres

- Each iteration assigns pixels inside a 2S window around every centre,
  then moves centres to the mean of their pixels

- Connectivity is enforced afterwards: every label keeps its largest
  4-connected piece and orphan pieces merge into the largest adjacent segment

A plain grid partition (:py:func:`grid_superpixels`) gives an exactly known
S₀ for tests.

Reference settings of the SEEDS run this stands in for are kept in
:py:data:`SEEDS_REFERENCE`.
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage.color import rgb2lab

from segdepth.core.rng import Rng
from segdepth.vision.partition import SegmentationMap

logger = logging.getLogger(__name__)


#: SEEDS settings of the original training recipe, for the record
SEEDS_REFERENCE = {
    "num_levels": 1,
    "histogram_bins": 5,
    "iterations": 50,
    "superpixels": 576,
}

#: Alternative superpixel count quoted for the preprocessing recipe
SEEDS_PREPROCESSING_SUPERPIXELS = 676

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class SuperpixelError(Exception):
    """More superpixels requested than the image has pixels."""


class SuperpixelMethod(enum.Enum):
    """How superpixels are produced."""

    #: Local k-means clustering
    slic = "slic"

    #: Regular grid cells, no clustering
    grid = "grid"


@dataclass
class Superpixelation(SegmentationMap):
    """Superpixel labels of one image.

    Every label in [0, n_segments) occurs at least once.
    """

    #: Clusters requested before connectivity enforcement
    requested: int = 0

    def __post_init__(self):
        super().__post_init__()
        assert self.counts().min() > 0, "Every superpixel label must occur"


def assignment_matrix(sp: SegmentationMap) -> np.ndarray:
    """Pixel to superpixel one-hot matrix S₀, shape (h·w)×n₀."""
    return sp.matrix()


def grid_shape(height: int, width: int, n: int) -> tuple[int, int]:
    """Rows and columns of the seeding grid.

    Never more than `n` cells in total.
    """
    columns = max(1, min(n, width, math.ceil(math.sqrt(n * width / height))))
    rows = max(1, min(height, n // columns))
    return rows, columns


def _grid_labels(height: int, width: int, rows: int, columns: int) -> np.ndarray:
    row_ids = (np.arange(height) * rows) // height
    column_ids = (np.arange(width) * columns) // width
    return row_ids[:, None] * columns + column_ids[None, :]


def _check_count(height: int, width: int, n: int):
    if n < 1:
        raise SuperpixelError(f"Need at least one superpixel, got {n}")
    if n > height * width:
        raise SuperpixelError(f"Cannot split a {height}x{width} image into {n} superpixels")


def grid_superpixels(height: int, width: int, n: int) -> Superpixelation:
    """Regular grid partition with the same cell layout SLIC seeds from."""
    _check_count(height, width, n)
    rows, columns = grid_shape(height, width, n)
    labels = _grid_labels(height, width, rows, columns)
    return Superpixelation(labels=labels.astype(np.int32), n_segments=rows * columns, requested=n)


def _assign(features: np.ndarray, centres: np.ndarray, step: float, spatial_weight: float) -> np.ndarray:
    """Assign pixels to centres within a 2S window, lowest centre index wins ties.

    :param features:
        h×w×5 array of (y, x, L, a, b)

    :param centres:
        k×5 array in the same layout

    :return:
        h×w labels, -1 where no window reached
    """
    height, width = features.shape[:2]
    labels = np.full((height, width), -1, dtype=np.int64)
    best = np.full((height, width), np.inf)
    radius = int(math.ceil(2 * step))
    for idx, centre in enumerate(centres):
        cy, cx = int(round(centre[0])), int(round(centre[1]))
        y0, y1 = max(cy - radius, 0), min(cy + radius + 1, height)
        x0, x1 = max(cx - radius, 0), min(cx + radius + 1, width)
        if y0 >= y1 or x0 >= x1:
            continue
        window = features[y0:y1, x0:x1]
        dist = _distance(window, centre, spatial_weight)
        region = best[y0:y1, x0:x1]
        update = dist < region
        region[update] = dist[update]
        labels[y0:y1, x0:x1][update] = idx
    return labels


def _distance(features: np.ndarray, centre: np.ndarray, spatial_weight: float) -> np.ndarray:
    colour = ((features[..., 2:] - centre[2:]) ** 2).sum(axis=-1)
    spatial = ((features[..., :2] - centre[:2]) ** 2).sum(axis=-1)
    return colour + spatial_weight * spatial


def _assign_leftovers(labels: np.ndarray, features: np.ndarray, centres: np.ndarray, spatial_weight: float):
    missing = labels < 0
    if not missing.any():
        return
    pixels = features[missing]
    dist = np.stack([_distance(pixels, c, spatial_weight) for c in centres], axis=1)
    labels[missing] = np.argmin(dist, axis=1)


def _update_centres(labels: np.ndarray, features: np.ndarray, centres: np.ndarray) -> np.ndarray:
    k = len(centres)
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k)
    updated = centres.copy()
    occupied = counts > 0
    for channel in range(features.shape[-1]):
        sums = np.bincount(flat, weights=features[..., channel].ravel(), minlength=k)
        updated[occupied, channel] = sums[occupied] / counts[occupied]
    return updated


def enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Make every label one 4-connected region and relabel contiguously.

    The largest piece of each label keeps it, ties to the piece found first in
    raster order. Remaining pieces merge into the adjacent label with the most
    pixels, ties to the lowest label.
    """
    labels = labels.copy()
    for value in np.unique(labels):
        pieces, count = ndimage.label(labels == value, structure=_FOUR_CONNECTED)
        if count <= 1:
            continue
        sizes = np.bincount(pieces.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        labels[(pieces > 0) & (pieces != keep)] = -1

    while (labels < 0).any():
        orphans, count = ndimage.label(labels < 0, structure=_FOUR_CONNECTED)
        sizes = np.bincount(labels[labels >= 0].ravel())
        merged_any = False
        for orphan_id in range(1, count + 1):
            blob = orphans == orphan_id
            ring = ndimage.binary_dilation(blob, structure=_FOUR_CONNECTED) & ~blob
            neighbours = np.unique(labels[ring])
            neighbours = neighbours[neighbours >= 0]
            if len(neighbours) == 0:
                continue
            target = int(neighbours[np.argmax(sizes[neighbours])])
            labels[blob] = target
            sizes[target] += int(blob.sum())
            merged_any = True
        assert merged_any, "Orphan regions without labelled neighbours"

    _, relabelled = np.unique(labels, return_inverse=True)
    return relabelled.reshape(labels.shape).astype(np.int32)


def generate_superpixels(
        image: np.ndarray,
        n: int,
        iters: int = 10,
        compactness: float = 10.0,
        rng: Optional[Rng] = None,
        method: SuperpixelMethod = SuperpixelMethod.slic,
        jitter: float = 0.0,
) -> Superpixelation:
    """Partition an image into at most `n` contiguous superpixels.

    :param image:
        h×w×3 RGB raster with values in [0, 1]

    :param compactness:
        Weight of spatial distance against CIELAB colour distance

    :param rng:
        Source for seed jitter. Only drawn from when `jitter` is positive.

    :param jitter:
        Move grid seeds by up to this fraction of the grid step

    :raise SuperpixelError:
        If n exceeds the pixel count
    """
    assert image.ndim == 3 and image.shape[-1] == 3, f"Expected an h×w×3 image, got {image.shape}"
    height, width = image.shape[:2]
    _check_count(height, width, n)

    if method == SuperpixelMethod.grid:
        return grid_superpixels(height, width, n)

    rows, columns = grid_shape(height, width, n)
    step = math.sqrt(height * width / n)
    spatial_weight = (compactness / step) ** 2

    lab = rgb2lab(np.clip(image, 0, 1).astype(np.float64))
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    features = np.concatenate([yy[..., None], xx[..., None], lab], axis=-1)

    cy = (np.arange(rows) + 0.5) * height / rows - 0.5
    cx = (np.arange(columns) + 0.5) * width / columns - 0.5
    grid_y, grid_x = np.meshgrid(cy, cx, indexing="ij")
    seeds = np.stack([grid_y.ravel(), grid_x.ravel()], axis=1)
    if jitter > 0:
        assert rng is not None, "Seed jitter needs an rng"
        seeds = seeds + rng.uniform(-jitter * step, jitter * step, size=seeds.shape)
        seeds = np.clip(seeds, 0, [height - 1, width - 1])
    iy = np.clip(np.round(seeds[:, 0]).astype(int), 0, height - 1)
    ix = np.clip(np.round(seeds[:, 1]).astype(int), 0, width - 1)
    centres = np.concatenate([seeds, lab[iy, ix]], axis=1)

    labels = _grid_labels(height, width, rows, columns)
    for _ in range(iters):
        labels = _assign(features, centres, step, spatial_weight)
        _assign_leftovers(labels, features, centres, spatial_weight)
        centres = _update_centres(labels, features, centres)

    labels = enforce_connectivity(labels)
    count = int(labels.max()) + 1
    logger.debug("Superpixels: requested %d, seeded %d, kept %d", n, len(centres), count)
    return Superpixelation(labels=labels, n_segments=count, requested=n)
