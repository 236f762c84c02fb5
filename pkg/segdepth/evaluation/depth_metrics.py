"""Depth loss and per-pixel depth metrics.

- :py:func:`silog_loss` is the differentiable training loss

- :py:func:`pixel_metrics` and :py:func:`segment_metrics` are the
  evaluation battery: AbsRel, RMSE, log10 and the δ threshold accuracies,
  over all valid pixels or per structural segment
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from dataclasses_json import dataclass_json

from segdepth.core import ops
from segdepth.core.ops import Operand

logger = logging.getLogger(__name__)


#: Values are clamped to at least this before taking logs in the loss
LOSS_EPS = 1e-6

#: Evaluation clamp range in metres
EVAL_DEPTH_RANGE = (1e-3, 10.0)

#: Default variance focus λ of the scale-invariant loss
DEFAULT_SILOG_LAMBDA = 0.85

#: δ thresholds are powers of this
DELTA_BASE = 1.25


class UndefinedMetric(Exception):
    """A metric was requested over nothing: an empty mask, edge set or point cloud."""


@dataclass_json
@dataclass
class MetricReport:
    """Per-pixel depth accuracy over a set of valid pixels."""

    #: Mean |p - g| / g
    abs_rel: float

    #: Root mean squared error in metres
    rmse: float

    #: Mean |log10 p - log10 g|
    log10: float

    #: Fraction with ratio below 1.25
    delta1: float

    #: Fraction with ratio below 1.25²
    delta2: float

    #: Fraction with ratio below 1.25³
    delta3: float

    #: Valid pixels the report covers
    pixels: int = 0

    @classmethod
    def mean(cls, reports: Sequence["MetricReport"]) -> "MetricReport":
        """Macro average, every report weighted equally."""
        assert reports, "Nothing to average"
        return cls(
            abs_rel=float(np.mean([r.abs_rel for r in reports])),
            rmse=float(np.mean([r.rmse for r in reports])),
            log10=float(np.mean([r.log10 for r in reports])),
            delta1=float(np.mean([r.delta1 for r in reports])),
            delta2=float(np.mean([r.delta2 for r in reports])),
            delta3=float(np.mean([r.delta3 for r in reports])),
            pixels=int(sum(r.pixels for r in reports)),
        )


def default_valid_mask(gt: np.ndarray) -> np.ndarray:
    """Ground truth pixels that are finite and positive."""
    return np.isfinite(gt) & (gt > 0)


def silog_loss(pred: Operand, gt: np.ndarray, valid: Optional[np.ndarray] = None, lam: float = DEFAULT_SILOG_LAMBDA):
    """Scale-invariant log loss `mean(g²) - λ mean(g)²`, `g = log pred - log gt`.

    Both rasters are clamped to at least 1e-6 before the log.

    :param valid:
        Pixels to include. Defaults to finite positive ground truth.

    :raise UndefinedMetric:
        If no pixel is valid
    """
    gt = np.asarray(gt)
    if valid is None:
        valid = default_valid_mask(gt)
    index = np.flatnonzero(valid)
    if index.size == 0:
        raise UndefinedMetric("SILog loss over an empty valid mask")

    pred_valid = ops.index(ops.reshape(pred, (-1,)), index)
    gt_valid = np.maximum(gt.reshape(-1)[index], LOSS_EPS)
    g = ops.sub(ops.log(ops.clip(pred_valid, LOSS_EPS, None)), np.log(gt_valid))
    mean_square = ops.mean(ops.mul(g, g))
    mean = ops.mean(g)
    return ops.sub(mean_square, ops.mul(ops.mul(mean, mean), lam))


def pixel_metrics(
        pred: np.ndarray,
        gt: np.ndarray,
        valid: Optional[np.ndarray] = None,
        depth_range: tuple[float, float] = EVAL_DEPTH_RANGE,
        symmetric_delta: bool = True,
) -> MetricReport:
    """Per-pixel depth metrics over valid pixels.

    :param symmetric_delta:
        δ uses `max(p/g, g/p)`. When off, the one-sided ratio `p/g`.

    :raise UndefinedMetric:
        If no pixel is valid
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    assert pred.shape == gt.shape, f"Prediction {pred.shape} and ground truth {gt.shape} differ"
    if valid is None:
        valid = default_valid_mask(gt)
    valid = valid & np.isfinite(pred)
    if not valid.any():
        raise UndefinedMetric("Pixel metrics over an empty valid mask")

    low, high = depth_range
    p = np.clip(pred[valid], low, high)
    g = np.clip(gt[valid], low, high)

    ratio = np.maximum(p / g, g / p) if symmetric_delta else p / g
    return MetricReport(
        abs_rel=float(np.mean(np.abs(p - g) / g)),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        delta1=float(np.mean(ratio < DELTA_BASE)),
        delta2=float(np.mean(ratio < DELTA_BASE ** 2)),
        delta3=float(np.mean(ratio < DELTA_BASE ** 3)),
        pixels=int(valid.sum()),
    )


def masks_from_labels(labels: np.ndarray) -> list[np.ndarray]:
    """One boolean mask per label value present, in label order."""
    return [labels == value for value in np.unique(labels)]


def segment_metrics(
        pred: np.ndarray,
        gt: np.ndarray,
        masks: Sequence[np.ndarray],
        valid: Optional[np.ndarray] = None,
        **kwargs,
) -> tuple[list[Optional[MetricReport]], MetricReport]:
    """Depth metrics within each structural segment.

    :param masks:
        Disjoint boolean masks, e.g. ground truth instances

    :return:
        Per-mask reports (None for a mask without valid pixels) and their macro average

    :raise UndefinedMetric:
        If no mask has a valid pixel
    """
    gt = np.asarray(gt)
    if valid is None:
        valid = default_valid_mask(gt)
    if len(masks) > 0:
        overlap = int((np.sum(np.asarray(masks, dtype=np.int32), axis=0) > 1).sum())
        assert overlap == 0, f"Segment masks overlap at {overlap} pixels"
    per_segment = []
    for mask in masks:
        inside = valid & mask
        per_segment.append(pixel_metrics(pred, gt, inside, **kwargs) if inside.any() else None)
    present = [r for r in per_segment if r is not None]
    if not present:
        raise UndefinedMetric("No segment has a valid pixel")
    return per_segment, MetricReport.mean(present)
