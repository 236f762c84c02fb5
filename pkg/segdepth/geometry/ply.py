"""ASCII PLY point clouds for external viewers."""
from pathlib import Path
from typing import Optional

import numpy as np


def write_ply(path: Path, points: np.ndarray, colours: Optional[np.ndarray] = None):
    """Write points, optionally with 8-bit RGB colours.

    :param colours:
        n×3, uint8 or floats in [0, 1]
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(points)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if colours is not None:
        assert len(colours) == len(points), f"{len(colours)} colours for {len(points)} points"
        if colours.dtype != np.uint8:
            colours = np.round(np.clip(colours, 0, 1) * 255).astype(np.uint8)
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")

    lines = header
    if colours is None:
        body = [f"{x:.6f} {y:.6f} {z:.6f}" for x, y, z in points]
    else:
        body = [f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}" for (x, y, z), (r, g, b) in zip(points, colours)]
    Path(path).write_text("\n".join(lines + body) + "\n", encoding="ascii")


def read_ply(path: Path) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Read a file written by :py:func:`write_ply`.

    :return:
        Points and colours, colours None when absent
    """
    lines = Path(path).read_text(encoding="ascii").splitlines()
    assert lines[0] == "ply", f"Not a PLY file: {path}"
    end = lines.index("end_header")
    count = next(int(line.split()[-1]) for line in lines[:end] if line.startswith("element vertex"))
    has_colour = any(line.startswith("property uchar red") for line in lines[:end])
    rows = np.array([line.split() for line in lines[end + 1:end + 1 + count]], dtype=np.float64).reshape(count, -1)
    points = rows[:, :3]
    colours = rows[:, 3:6].astype(np.uint8) if has_colour else None
    return points, colours
