"""Pinhole camera model.

Pixel (u, v) is column u, row v. Camera axes: x right, y down, z forward.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from dataclasses_json import dataclass_json


#: Scale applied to stored millimetre depth before lifting, for external data
MILLIMETRE_SCALE = 1 / 1000


@dataclass_json
@dataclass(frozen=True)
class Intrinsics:
    """Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        assert self.fx > 0 and self.fy > 0, f"Focal lengths must be positive: {self.fx}, {self.fy}"

    @classmethod
    def default_for(cls, height: int, width: int) -> "Intrinsics":
        """Synthetic camera: fx = fy = 0.6·w, principal point at the image centre."""
        focal = 0.6 * width
        return cls(fx=focal, fy=focal, cx=(width - 1) / 2, cy=(height - 1) / 2)

    def scaled(self, sx: float, sy: float) -> "Intrinsics":
        """Intrinsics after resizing the image by the given factors (half-pixel centres)."""
        return Intrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=(self.cx + 0.5) * sx - 0.5,
            cy=(self.cy + 0.5) * sy - 0.5,
        )

    def cropped(self, left: int, top: int) -> "Intrinsics":
        return Intrinsics(fx=self.fx, fy=self.fy, cx=self.cx - left, cy=self.cy - top)

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0, self.cx],
            [0, self.fy, self.cy],
            [0, 0, 1],
        ])


def pixel_rays(height: int, width: int, k: Intrinsics) -> np.ndarray:
    """Ray direction with unit z per pixel, h×w×3."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)


def backproject(depth: np.ndarray, k: Intrinsics, scale: float = 1.0, valid: Optional[np.ndarray] = None) -> np.ndarray:
    """Lift valid depth pixels to camera space points.

    `p = (s·d·(u - cx)/fx, s·d·(v - cy)/fy, s·d)`

    :param valid:
        Pixels to lift. Defaults to finite positive depth.

    :return:
        n×3 points in row-major pixel order
    """
    depth = np.asarray(depth, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(depth) & (depth > 0)
    rays = pixel_rays(depth.shape[0], depth.shape[1], k)
    return rays[valid] * (scale * depth[valid])[:, None]


def reproject(points: np.ndarray, k: Intrinsics, scale: float = 1.0) -> np.ndarray:
    """Project points back to (u, v, depth).

    :return:
        n×3 array of column, row and unscaled depth
    """
    points = np.asarray(points, dtype=np.float64)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.stack([k.fx * x / z + k.cx, k.fy * y / z + k.cy, z / scale], axis=1)
