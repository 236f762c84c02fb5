"""Training-time sample augmentation.

Random draws happen in a fixed order from the given stream: flip, gamma,
brightness, per-channel colour gains, crop offsets. The same stream therefore
always gives the same augmented sample.
"""
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from dataclasses_json import dataclass_json

from segdepth.core.rng import Rng
from segdepth.data.scene import Sample


class AugmentError(Exception):
    """Augmentation cannot be applied to this sample."""


@dataclass_json
@dataclass
class AugmentConfig:

    #: Chance of a horizontal flip
    flip_probability: float = 0.5

    gamma: Tuple[float, float] = (0.9, 1.1)

    brightness: Tuple[float, float] = (0.75, 1.25)

    #: Range of the independent per-channel gain
    colour_gain: Tuple[float, float] = (0.9, 1.1)

    #: Random crop (height, width), None keeps the full frame
    crop_size: Optional[Tuple[int, int]] = None


def adjust_gamma(image: np.ndarray, gamma: float) -> np.ndarray:
    return np.power(image, gamma)


def hflip_sample(sample: Sample) -> Sample:
    """Mirror the image, depth and instances left to right."""
    width = sample.depth.shape[1]
    intrinsics = sample.intrinsics
    if intrinsics is not None:
        intrinsics = replace(intrinsics, cx=width - 1 - intrinsics.cx)
    return replace(
        sample,
        image=sample.image[:, ::-1].copy(),
        depth=sample.depth[:, ::-1].copy(),
        instances=sample.instances[:, ::-1].copy(),
        intrinsics=intrinsics,
        primitives=None,
        camera_position=None,
    )


def crop_sample(sample: Sample, top: int, left: int, size: tuple[int, int]) -> Sample:
    height, width = size
    window = (slice(top, top + height), slice(left, left + width))
    intrinsics = sample.intrinsics.cropped(left, top) if sample.intrinsics is not None else None
    return replace(
        sample,
        image=sample.image[window].copy(),
        depth=sample.depth[window].copy(),
        instances=sample.instances[window].copy(),
        intrinsics=intrinsics,
    )


def augment(sample: Sample, rng: Rng, config: AugmentConfig) -> Sample:
    """Apply a random flip, photometric changes and a crop.

    Photometric changes touch the image only. Values are clipped back to [0, 1].

    :raise AugmentError:
        If the crop is larger than the sample
    """
    flip = rng.random() < config.flip_probability
    gamma = rng.uniform(*config.gamma)
    brightness = rng.uniform(*config.brightness)
    gains = rng.uniform(config.colour_gain[0], config.colour_gain[1], size=3)

    height, width = sample.depth.shape
    crop = config.crop_size or (height, width)
    if crop[0] > height or crop[1] > width:
        raise AugmentError(f"Crop {crop} larger than the {height}×{width} sample")
    top = int(rng.integers(0, height - crop[0] + 1))
    left = int(rng.integers(0, width - crop[1] + 1))

    if flip:
        sample = hflip_sample(sample)

    image = adjust_gamma(sample.image, gamma) * brightness * gains
    image = np.clip(image, 0, 1).astype(np.float32)
    sample = replace(sample, image=image)

    if crop != (height, width):
        sample = crop_sample(sample, top, left, crop)
    return sample
