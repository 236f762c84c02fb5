"""Bring externally captured RGB-D frames to the model's input format.

External depth usually comes as 16-bit millimetres with an invalid border
from the sensor registration. The border box is cropped, both rasters are
resized bilinearly and depth is converted to metres.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from segdepth.core.precision import precision
from segdepth.geometry.camera import Intrinsics
from segdepth.vision.resize import resize_bilinear

#: Valid region (left, top, right, bottom) of 640×480 Kinect-style frames
KINECT_VALID_BOX = (43, 45, 608, 472)

#: Raw 16-bit depth units per metre
MILLIMETRES_PER_METRE = 1000.0


@dataclass
class PreprocessedFrame:
    image: np.ndarray
    depth: np.ndarray

    #: Pixels with a measured depth before resizing
    valid: np.ndarray

    intrinsics: Optional[Intrinsics] = None


def preprocess_external(
        image: np.ndarray,
        depth: np.ndarray,
        size: tuple[int, int],
        crop_box: Optional[tuple[int, int, int, int]] = KINECT_VALID_BOX,
        depth_divisor: float = MILLIMETRES_PER_METRE,
        intrinsics: Optional[Intrinsics] = None,
) -> PreprocessedFrame:
    """Crop, resize and rescale one external frame.

    :param image:
        h×w×3, uint8 or floats in [0, 1]

    :param depth:
        h×w raw depth, zero where the sensor had no reading

    :param size:
        Output (height, width)

    :param crop_box:
        (left, top, right, bottom) exclusive bounds, None keeps the frame
    """
    assert image.shape[:2] == depth.shape, f"Image {image.shape} and depth {depth.shape} disagree"
    if image.dtype == np.uint8:
        image = image.astype(np.float64) / 255
    if crop_box is not None:
        left, top, right, bottom = crop_box
        assert 0 <= left < right <= depth.shape[1] and 0 <= top < bottom <= depth.shape[0], f"Crop box {crop_box} outside {depth.shape}"
        image = image[top:bottom, left:right]
        depth = depth[top:bottom, left:right]
        if intrinsics is not None:
            intrinsics = intrinsics.cropped(left, top)

    metres = depth.astype(np.float64) / depth_divisor
    valid = metres > 0
    height, width = depth.shape
    with precision("float64"):
        resized_image = resize_bilinear(image.astype(np.float64), size)
        resized_depth = resize_bilinear(metres, size)
        # Nearest-style validity: a pixel stays valid only if every contributing input pixel was
        resized_valid = resize_bilinear(valid.astype(np.float64), size) > 1 - 1e-9
    if intrinsics is not None:
        intrinsics = intrinsics.scaled(size[1] / width, size[0] / height)
    return PreprocessedFrame(
        image=np.clip(resized_image, 0, 1).astype(np.float32),
        depth=resized_depth.astype(np.float32),
        valid=resized_valid,
        intrinsics=intrinsics,
    )
