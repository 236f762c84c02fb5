"""Binary Netpbm rasters through Pillow.

- P6 PPM, 8-bit RGB, for images and overlays

- P5 PGM, 16-bit big-endian, for label and instance rasters
"""
import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

logger = logging.getLogger(__name__)


#: Pillow modes a 16-bit P5 file may decode to, depending on the Pillow release
SIXTEEN_BIT_MODES = ("I", "I;16", "I;16B")


class NetpbmFormatError(Exception):
    """Raster file header or payload does not parse."""


def image_to_bytes(image: np.ndarray) -> np.ndarray:
    """Quantise a [0, 1] float image to 8-bit."""
    return np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)


def bytes_to_image(raw: np.ndarray) -> np.ndarray:
    """8-bit raster to float32 values q/255."""
    return raw.astype(np.float32) / np.float32(255)


def _open(path: Path) -> Image.Image:
    """Open and fully decode a Netpbm file.

    Pillow decodes lazily, so truncated payloads only surface on `load()`.
    """
    try:
        with Image.open(path, formats=["PPM"]) as img:
            img.load()
            return img
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        raise NetpbmFormatError(f"Cannot decode {path}: {e}") from e


def write_ppm(path: Path, image: np.ndarray):
    """Write an h×w×3 image, floats in [0, 1] or uint8."""
    assert image.ndim == 3 and image.shape[2] == 3, f"Expected h×w×3, got {image.shape}"
    raw = image if image.dtype == np.uint8 else image_to_bytes(image)
    Image.fromarray(np.ascontiguousarray(raw)).save(path, format="PPM")


def read_ppm(path: Path) -> np.ndarray:
    """Read an 8-bit P6 file as float32 q/255."""
    img = _open(path)
    if img.mode != "RGB":
        raise NetpbmFormatError(f"Expected an RGB P6 file, got mode {img.mode} in {path}")
    return bytes_to_image(np.asarray(img, dtype=np.uint8))


def write_pgm16(path: Path, labels: np.ndarray):
    """Write an integer raster as 16-bit big-endian P5."""
    assert labels.ndim == 2, f"Expected a 2-D raster, got {labels.shape}"
    assert labels.min() >= 0 and labels.max() < 65536, "Values must fit 16 bits"
    # Mode I rasters are saved as P5 with maxval 65535
    Image.fromarray(np.ascontiguousarray(labels, dtype=np.int32)).save(path, format="PPM")


def read_pgm16(path: Path) -> np.ndarray:
    """Read a 16-bit P5 file as an int32 raster."""
    img = _open(path)
    if img.mode not in SIXTEEN_BIT_MODES:
        raise NetpbmFormatError(f"Expected a 16-bit PGM, got mode {img.mode} in {path}")
    return np.asarray(img).astype(np.int32)
