"""Point cloud Chamfer distances.

Precision direction: predicted → ground truth.
Recall direction: ground truth → predicted.
"""
import logging
from dataclasses import dataclass

import numpy as np
from dataclasses_json import dataclass_json
from scipy.spatial import cKDTree

from segdepth.evaluation.depth_metrics import UndefinedMetric

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class ChamferResult:
    """Mean nearest-neighbour distances in both directions."""

    #: Mean over predicted points of the distance to the nearest ground truth point
    precision: float

    #: Mean over ground truth points of the distance to the nearest predicted point
    recall: float

    squared: bool = True

    def as_tuple(self) -> tuple[float, float]:
        return self.precision, self.recall


def nearest_squared(sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared distance from every source point to its nearest target point.

    A k-d tree finds the nearest target, the squared distance is recomputed
    from coordinates so results match a brute force search exactly.
    """
    tree = cKDTree(targets)
    _, nearest = tree.query(sources, k=1)
    return ((sources - targets[nearest]) ** 2).sum(axis=1)


def chamfer_3d(a: np.ndarray, b: np.ndarray, squared: bool = True) -> ChamferResult:
    """Directed Chamfer distances between two clouds.

    :param a:
        Predicted n×3 points

    :param b:
        Ground truth m×3 points

    :param squared:
        Average squared distances. When off, average plain distances.

    :raise UndefinedMetric:
        If either cloud is empty
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise UndefinedMetric(f"Chamfer distance over an empty cloud: {len(a)} and {len(b)} points")

    ab = nearest_squared(a, b)
    ba = nearest_squared(b, a)
    if not squared:
        ab, ba = np.sqrt(ab), np.sqrt(ba)
    return ChamferResult(precision=float(ab.mean()), recall=float(ba.mean()), squared=squared)
