"""Quality of learned segments against ground truth regions."""
import logging

import numpy as np
from scipy import ndimage

from segdepth.vision.partition import SegmentationMap, label_boundaries

logger = logging.getLogger(__name__)


#: Boundary match tolerance in pixels
DEFAULT_TOLERANCE = 1.0


def _labels(segmentation: SegmentationMap | np.ndarray) -> np.ndarray:
    if isinstance(segmentation, SegmentationMap):
        return segmentation.labels
    return np.asarray(segmentation)


def _compact(labels: np.ndarray) -> tuple[np.ndarray, int]:
    values, inverse = np.unique(labels, return_inverse=True)
    return inverse.reshape(labels.shape), len(values)


def region_miou(pred_seg: SegmentationMap | np.ndarray, gt_labels: np.ndarray) -> float:
    """Mean over ground truth regions of the best IoU with any predicted segment.

    Several ground truth regions may match the same predicted segment.
    """
    pred, n_pred = _compact(_labels(pred_seg))
    gt, n_gt = _compact(np.asarray(gt_labels))
    assert pred.shape == gt.shape, f"Raster sizes differ: {pred.shape} vs {gt.shape}"

    joint = np.bincount((pred * n_gt + gt).ravel(), minlength=n_pred * n_gt).reshape(n_pred, n_gt)
    pred_sizes = joint.sum(axis=1)
    gt_sizes = joint.sum(axis=0)
    union = pred_sizes[:, None] + gt_sizes[None, :] - joint
    iou = joint / union
    return float(iou.max(axis=0).mean())


def _matched_fraction(sources: np.ndarray, targets: np.ndarray, tolerance: float) -> float:
    """Fraction of source boundary pixels within tolerance of a target boundary pixel."""
    if not targets.any():
        return 0.0
    distance = ndimage.distance_transform_edt(~targets)
    return float((distance[sources] <= tolerance).mean())


def boundary_fscore(pred_seg: SegmentationMap | np.ndarray, gt_labels: np.ndarray, tol_px: float = DEFAULT_TOLERANCE) -> float:
    """Harmonic mean of boundary precision and recall.

    Boundary pixels are those with a 4-neighbour of a different label.
    Two partitions without any boundary agree perfectly.
    """
    pred_boundary = label_boundaries(_labels(pred_seg))
    gt_boundary = label_boundaries(np.asarray(gt_labels))
    assert pred_boundary.shape == gt_boundary.shape, "Raster sizes differ"

    if not pred_boundary.any() and not gt_boundary.any():
        return 1.0
    if not pred_boundary.any() or not gt_boundary.any():
        return 0.0

    precision = _matched_fraction(pred_boundary, gt_boundary, tol_px)
    recall = _matched_fraction(gt_boundary, pred_boundary, tol_px)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
