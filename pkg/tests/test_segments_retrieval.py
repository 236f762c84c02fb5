"""Segmentation quality and layout-aware retrieval."""
import numpy as np
import pytest

from segdepth.evaluation.depth_metrics import UndefinedMetric
from segdepth.evaluation.retrieval import random_baseline, retrieval_sweep, retrieval_topk
from segdepth.evaluation.segmentation import boundary_fscore, region_miou
from segdepth.vision.partition import SegmentationMap


@pytest.fixture()
def halves() -> np.ndarray:
    labels = np.zeros((4, 6), dtype=int)
    labels[:, 3:] = 1
    return labels


def test_identical_partitions(halves):
    assert region_miou(halves, halves) == 1.0
    assert boundary_fscore(halves, halves) == 1.0


def test_single_segment_against_halves(halves):
    single = SegmentationMap(np.zeros_like(halves), 1)
    assert region_miou(single, halves) == pytest.approx(0.5)
    assert boundary_fscore(single, halves) == 0.0


def test_relabelling_does_not_matter(halves):
    pred = np.zeros_like(halves)
    pred[:, 2:] = 1
    shifted = pred + 7
    assert region_miou(shifted, halves) == region_miou(pred, halves)
    assert boundary_fscore(shifted, halves) == boundary_fscore(pred, halves)
    assert region_miou(1 - halves, halves) == 1.0


def test_boundary_tolerance(halves):
    pred = np.zeros_like(halves)
    pred[:, 2:] = 1
    # Predicted boundary one column left of the truth
    assert boundary_fscore(pred, halves, tol_px=1.0) == pytest.approx(1.0)
    assert boundary_fscore(pred, halves, tol_px=0.0) < 1.0


def test_miou_range():
    rng = np.random.default_rng(0)
    for _ in range(10):
        pred, gt = rng.integers(0, 4, size=(8, 8)), rng.integers(0, 3, size=(8, 8))
        assert 0.0 <= region_miou(pred, gt) <= 1.0


def test_retrieval_duplicates():
    embeddings = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]])
    assert retrieval_topk(embeddings, [0, 0, 1, 1], k=1) == 1.0


def test_retrieval_mismatched_pairs():
    embeddings = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    assert retrieval_topk(embeddings, [0, 0, 1, 1], k=1) == 0.0
    assert retrieval_topk(embeddings, [0, 0, 1, 1], k=3) == 1.0


def test_retrieval_hand_ranking():
    """Item 0 is nearest to 2, item 1 to 2, item 2 to 1."""
    embeddings = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    groups = [0, 1, 1]
    # Query 0 has no same-group item and is skipped, queries 1 and 2 hit each other
    assert retrieval_topk(embeddings, groups, k=1) == 1.0
    assert retrieval_topk(embeddings, [0, 0, 1], k=1) == 0.0


def test_retrieval_self_excluded():
    embeddings = np.eye(3)
    with pytest.raises(UndefinedMetric):
        retrieval_topk(embeddings, [0, 1, 2])


def test_frame_window():
    embeddings = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]])
    groups = [0, 0, 0, 0]
    frames = [0, 3, 1, 4]
    assert retrieval_topk(embeddings, groups, k=1) == 1.0
    assert retrieval_topk(embeddings, groups, k=1, frames=frames, frame_k=1) == 0.0
    assert retrieval_topk(embeddings, groups, k=1, frames=frames, frame_k=3) == 1.0


def test_random_baseline():
    assert random_baseline([0, 0, 1, 1]) == pytest.approx(1 / 3)
    assert random_baseline([0, 0, 0, 1]) == pytest.approx(2 / 3)


def test_retrieval_sweep_table():
    rng = np.random.default_rng(1)
    embeddings = rng.normal(size=(12, 5))
    groups = np.repeat(np.arange(3), 4)
    frames = np.tile(np.arange(4), 3)
    table = retrieval_sweep(embeddings, groups, frames, top_ks=(1, 3), frame_ks=(1, 2))
    assert list(table.columns) == ["protocol", "frame_k", "top_k", "accuracy"]
    assert len(table) == 2 + 2 * 2
    assert table["accuracy"].between(0, 1).all()
    scene = table[table["protocol"] == "scene"].set_index("top_k")["accuracy"]
    assert scene[1] <= scene[3]
