"""On-disk dataset layout.

Each sample is three files sharing a stem:

- `<stem>.ppm` 8-bit RGB image

- `<stem>.depth` raw depth: magic `SHEDDPTH`, little-endian u32 height and width,
  then height×width little-endian float32 metres in row-major order

- `<stem>.pgm` 16-bit instance ids

Every split directory has a `manifest.csv` listing stems with their scene and
frame ids and camera intrinsics.
"""
import logging
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from segdepth.data.scene import Sample
from segdepth.geometry.camera import Intrinsics
from segdepth.vision.netpbm import NetpbmFormatError, read_pgm16, read_ppm, write_pgm16, write_ppm

logger = logging.getLogger(__name__)


DEPTH_MAGIC = b"SHEDDPTH"

MANIFEST_NAME = "manifest.csv"

MANIFEST_COLUMNS = ["stem", "scene_id", "frame_id", "height", "width", "fx", "fy", "cx", "cy"]

_DEPTH_HEADER = struct.Struct("<8sII")


class SampleFormatError(Exception):
    """A stored sample or manifest is malformed."""


def depth_to_bytes(depth: np.ndarray) -> bytes:
    height, width = depth.shape
    return _DEPTH_HEADER.pack(DEPTH_MAGIC, height, width) + depth.astype("<f4").tobytes()


def depth_from_bytes(data: bytes) -> np.ndarray:
    """:raise SampleFormatError: on a bad magic or a payload of the wrong length"""
    if len(data) < _DEPTH_HEADER.size:
        raise SampleFormatError(f"Depth file too short for its header: {len(data)} bytes")
    magic, height, width = _DEPTH_HEADER.unpack_from(data)
    if magic != DEPTH_MAGIC:
        raise SampleFormatError(f"Bad depth magic {magic!r}")
    payload = data[_DEPTH_HEADER.size:]
    expected = height * width * 4
    if len(payload) != expected:
        raise SampleFormatError(f"Depth payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float32)


def write_depth(path: Path, depth: np.ndarray):
    Path(path).write_bytes(depth_to_bytes(depth))


def read_depth(path: Path) -> np.ndarray:
    return depth_from_bytes(Path(path).read_bytes())


def write_sample(directory: Path, sample: Sample, stem: str = None) -> str:
    """Write the three files of a sample.

    :return:
        The stem used
    """
    stem = stem or sample.stem
    directory = Path(directory)
    write_ppm(directory / f"{stem}.ppm", sample.image)
    write_depth(directory / f"{stem}.depth", sample.depth)
    write_pgm16(directory / f"{stem}.pgm", sample.instances)
    return stem


def read_sample(directory: Path, stem: str, scene_id: int = 0, frame_id: int = 0, intrinsics: Intrinsics = None) -> Sample:
    """Read a sample written by :py:func:`write_sample`.

    :raise SampleFormatError:
        If any file is malformed or the rasters disagree in size
    """
    directory = Path(directory)
    try:
        image = read_ppm(directory / f"{stem}.ppm")
        instances = read_pgm16(directory / f"{stem}.pgm")
    except NetpbmFormatError as e:
        raise SampleFormatError(f"Sample {stem}: {e}") from e
    depth = read_depth(directory / f"{stem}.depth")
    if image.shape[:2] != depth.shape or instances.shape != depth.shape:
        raise SampleFormatError(f"Sample {stem}: image {image.shape}, depth {depth.shape} and instances {instances.shape} disagree")
    return Sample(image=image, depth=depth, instances=instances, scene_id=scene_id, frame_id=frame_id, intrinsics=intrinsics)


def manifest_row(stem: str, sample: Sample) -> dict:
    height, width = sample.depth.shape
    k = sample.intrinsics or Intrinsics.default_for(height, width)
    return {
        "stem": stem,
        "scene_id": sample.scene_id,
        "frame_id": sample.frame_id,
        "height": height,
        "width": width,
        "fx": k.fx,
        "fy": k.fy,
        "cx": k.cx,
        "cy": k.cy,
    }


def write_split(directory: Path, samples: list[Sample]) -> pd.DataFrame:
    """Write samples and their manifest into a split directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = [manifest_row(write_sample(directory, sample), sample) for sample in samples]
    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(directory / MANIFEST_NAME, index=False)
    logger.info("Wrote %d samples to %s", len(samples), directory)
    return manifest


def read_manifest(directory: Path) -> pd.DataFrame:
    """:raise SampleFormatError: when the manifest is missing columns"""
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"No manifest at {path}")
    manifest = pd.read_csv(path)
    missing = sorted(set(MANIFEST_COLUMNS) - set(manifest.columns))
    if missing:
        raise SampleFormatError(f"Manifest {path} lacks columns {missing}")
    return manifest


def read_split(directory: Path) -> list[Sample]:
    """Read every sample listed in a split's manifest."""
    manifest = read_manifest(directory)
    samples = []
    for row in manifest.itertuples(index=False):
        k = Intrinsics(fx=row.fx, fy=row.fy, cx=row.cx, cy=row.cy)
        samples.append(read_sample(directory, row.stem, int(row.scene_id), int(row.frame_id), k))
    return samples
