"""Superpixel partitions and the pixel-to-superpixel matrix."""
import numpy as np
import pytest
from scipy import ndimage

from segdepth.core.rng import Rng
from segdepth.vision.partition import SegmentationMap
from segdepth.vision.superpixel import (
    SuperpixelError,
    SuperpixelMethod,
    assignment_matrix,
    enforce_connectivity,
    generate_superpixels,
    grid_superpixels,
)


@pytest.fixture(scope="module")
def noise_image() -> np.ndarray:
    return np.random.default_rng(3).uniform(size=(24, 24, 3))


def test_constant_image_splits_into_quadrants():
    image = np.full((8, 8, 3), 0.5)
    sp = generate_superpixels(image, 4)
    assert sp.n_segments == 4
    expected = np.zeros((8, 8), dtype=int)
    expected[:4, 4:] = 1
    expected[4:, :4] = 2
    expected[4:, 4:] = 3
    assert np.array_equal(sp.labels, expected)


def test_single_superpixel():
    image = np.random.default_rng(0).uniform(size=(6, 5, 3))
    sp = generate_superpixels(image, 1)
    assert sp.n_segments == 1
    assert (sp.labels == 0).all()


def test_colour_edge_wins_without_compactness():
    image = np.zeros((8, 8, 3))
    image[:, 4:] = 1.0
    sp = generate_superpixels(image, 2, compactness=0.01)
    assert sp.n_segments == 2
    assert (sp.labels[:, :4] == 0).all()
    assert (sp.labels[:, 4:] == 1).all()


def test_too_many_superpixels():
    with pytest.raises(SuperpixelError):
        generate_superpixels(np.zeros((2, 2, 3)), 5)


def test_segments_are_connected_and_bounded(noise_image):
    sp = generate_superpixels(noise_image, 16)
    assert 1 <= sp.n_segments <= 16
    assert (sp.counts() > 0).all()
    for label in range(sp.n_segments):
        _, pieces = ndimage.label(sp.labels == label)
        assert pieces == 1, f"Label {label} has {pieces} pieces"


def test_superpixels_are_deterministic(noise_image):
    a = generate_superpixels(noise_image, 16, rng=Rng(1), jitter=0.3)
    b = generate_superpixels(noise_image, 16, rng=Rng(1), jitter=0.3)
    assert np.array_equal(a.labels, b.labels)


def test_grid_method():
    sp = generate_superpixels(np.zeros((16, 16, 3)), 16, method=SuperpixelMethod.grid)
    assert sp.n_segments == 16
    assert np.array_equal(sp.labels, grid_superpixels(16, 16, 16).labels)
    assert (sp.counts() == 16).all()


def test_enforce_connectivity_merges_orphans():
    labels = np.array([
        [0, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [1, 1, 1, 1],
    ])
    fixed = enforce_connectivity(labels)
    # The lone 1 at (1, 1) is surrounded by 0
    assert fixed[1, 1] == fixed[0, 0]
    assert fixed.max() == 1


def test_assignment_matrix_examples():
    one_by_two = SegmentationMap(np.array([[0, 1]]), 2)
    assert np.array_equal(assignment_matrix(one_by_two), np.eye(2))

    single = SegmentationMap(np.zeros((2, 2), dtype=int), 1)
    assert np.array_equal(assignment_matrix(single).sum(axis=0), [4])

    three = SegmentationMap(np.array([[0, 0, 1]]), 2)
    assert np.array_equal(assignment_matrix(three), [[1, 0], [1, 0], [0, 1]])


def test_assignment_matrix_reconstructs_labels(noise_image):
    sp = generate_superpixels(noise_image, 9)
    matrix = assignment_matrix(sp)
    assert np.array_equal(matrix.sum(axis=1), np.ones(24 * 24))
    assert np.array_equal(matrix.sum(axis=0), sp.counts())
    assert np.array_equal(SegmentationMap.from_matrix(matrix, sp.shape).labels, sp.labels)
