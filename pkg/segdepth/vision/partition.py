"""Image partitions in compact label form."""
from dataclasses import dataclass

import numpy as np

from segdepth.core.precision import get_dtype


def label_boundaries(labels: np.ndarray) -> np.ndarray:
    """Mark pixels whose right or lower 4-neighbour carries a different label.

    Both pixels of a differing pair are marked, so the mask is symmetric under
    flips.

    :return:
        Boolean h×w mask
    """
    mask = np.zeros(labels.shape, dtype=bool)
    vertical = labels[1:, :] != labels[:-1, :]
    horizontal = labels[:, 1:] != labels[:, :-1]
    mask[1:, :] |= vertical
    mask[:-1, :] |= vertical
    mask[:, 1:] |= horizontal
    mask[:, :-1] |= horizontal
    return mask


@dataclass
class SegmentationMap:
    """Per-pixel hard assignment of an image to segments.

    Stored as a label raster. The one-hot pixel-to-segment matrix is
    produced on demand by :py:meth:`matrix`.
    """

    #: h×w integer raster, values in [0, n_segments)
    labels: np.ndarray

    #: Number of columns of the one-hot matrix
    n_segments: int

    def __post_init__(self):
        assert self.labels.ndim == 2, f"Labels must be a 2-D raster, got {self.labels.shape}"
        assert self.n_segments >= 1, f"Need at least one segment, got {self.n_segments}"
        if self.labels.size:
            assert self.labels.min() >= 0 and self.labels.max() < self.n_segments, \
                f"Labels out of range [0, {self.n_segments}): {self.labels.min()}..{self.labels.max()}"

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def counts(self) -> np.ndarray:
        """Pixel count per segment, the column sums of :py:meth:`matrix`."""
        return np.bincount(self.labels.ravel(), minlength=self.n_segments)

    def matrix(self) -> np.ndarray:
        """One-hot (h·w)×n matrix, rows in row-major pixel order."""
        flat = self.labels.ravel()
        result = np.zeros((flat.size, self.n_segments), dtype=get_dtype())
        result[np.arange(flat.size), flat] = 1
        return result

    def boundaries(self) -> np.ndarray:
        return label_boundaries(self.labels)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, shape: tuple[int, int]) -> "SegmentationMap":
        """Recover labels from a one-hot matrix by row argmax."""
        labels = np.argmax(matrix, axis=1).reshape(shape)
        return cls(labels=labels, n_segments=matrix.shape[1])

    def is_nested_in(self, coarser: "SegmentationMap") -> bool:
        """Every segment of this map lies inside a single segment of the coarser map."""
        assert self.shape == coarser.shape, f"Raster sizes differ: {self.shape} vs {coarser.shape}"
        pairs = np.unique(np.stack([self.labels.ravel(), coarser.labels.ravel()]), axis=1)
        return len(np.unique(pairs[0])) == pairs.shape[1]
