"""Occlusion-boundary accuracy.

Directed Chamfer distances between predicted and ground truth edge masks:

- ε_a (accuracy): from every predicted edge pixel to the nearest ground truth edge pixel
- ε_c (consistency): from every ground truth edge pixel to the nearest predicted edge pixel

Reported in squared pixels by default.
"""
import logging
from dataclasses import dataclass

import numpy as np
from dataclasses_json import dataclass_json
from scipy import ndimage

from segdepth.evaluation.canny import canny_edges
from segdepth.evaluation.depth_metrics import UndefinedMetric

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class BoundaryReport:
    """Both Chamfer directions between two edge masks."""

    #: Predicted → ground truth
    eps_a: float

    #: Ground truth → predicted
    eps_c: float

    #: Distances are squared pixels, else pixels
    squared: bool = True


def nearest_squared_distances(sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared distance from every source pixel to its nearest target pixel.

    The exact Euclidean distance transform picks the nearest target, the
    squared distance is then taken from integer coordinate differences.

    :param sources:
        Boolean mask

    :param targets:
        Non-empty boolean mask of the same shape
    """
    assert sources.shape == targets.shape, f"Mask shapes differ: {sources.shape} vs {targets.shape}"
    _, (nearest_y, nearest_x) = ndimage.distance_transform_edt(~targets, return_indices=True)
    ys, xs = np.nonzero(sources)
    dy = ys - nearest_y[ys, xs]
    dx = xs - nearest_x[ys, xs]
    return (dy * dy + dx * dx).astype(np.float64)


def directed_chamfer(sources: np.ndarray, targets: np.ndarray, squared: bool = True) -> float:
    distances = nearest_squared_distances(sources, targets)
    if not squared:
        distances = np.sqrt(distances)
    return float(distances.mean())


def boundary_chamfer(pred_edges: np.ndarray, gt_edges: np.ndarray, squared: bool = True) -> BoundaryReport:
    """ε_a and ε_c between two edge masks.

    :param squared:
        Average squared distances. When off, average plain distances.

    :raise UndefinedMetric:
        If either mask has no edge pixel
    """
    pred_edges = np.asarray(pred_edges, dtype=bool)
    gt_edges = np.asarray(gt_edges, dtype=bool)
    if not pred_edges.any():
        raise UndefinedMetric("Predicted edge mask is empty")
    if not gt_edges.any():
        raise UndefinedMetric("Ground truth edge mask is empty")
    return BoundaryReport(
        eps_a=directed_chamfer(pred_edges, gt_edges, squared),
        eps_c=directed_chamfer(gt_edges, pred_edges, squared),
        squared=squared,
    )


def depth_boundary_chamfer(pred: np.ndarray, gt: np.ndarray, squared: bool = True, **canny_kwargs) -> BoundaryReport:
    """Run Canny on both depth maps and compare the edges."""
    return boundary_chamfer(canny_edges(pred, **canny_kwargs), canny_edges(gt, **canny_kwargs), squared)
