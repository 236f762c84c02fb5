"""Pooling, unpooling and projection through the segment hierarchy."""
import numpy as np
import pytest

from segdepth.core import ops
from segdepth.core.gradcheck import grad_check
from segdepth.core.precision import precision
from segdepth.model.hierarchy import (
    compose_segmentation,
    compose_soft,
    farthest_point_sample,
    hard_matrix,
    pool_tokens,
    pooled_mean,
    project_spatial,
    skip_fuse,
    soft_assign,
    unpool_tokens,
)
from segdepth.testing.oracles import greedy_max_min
from segdepth.vision.partition import SegmentationMap


def _identity(x):
    return x


def _zero(x):
    return ops.mul(x, 0.0)


def test_fps_one_dimensional_example():
    points = np.array([[0.0], [3.0], [10.0]])
    assert farthest_point_sample(points, 2, start=0) == [0, 2]


def test_fps_default_start_is_largest_norm():
    points = np.array([[1.0, 0.0], [0.0, -4.0], [2.0, 2.0]])
    assert farthest_point_sample(points, 1) == [1]


def test_fps_all_rows():
    points = np.random.default_rng(0).normal(size=(6, 3))
    picked = farthest_point_sample(points, 6)
    assert sorted(picked) == list(range(6))
    assert picked == greedy_max_min(points, 6)


def test_fps_identical_points_tie_to_lowest():
    points = np.ones((4, 2))
    assert farthest_point_sample(points, 2, start=2) == [2, 0]


@pytest.mark.parametrize("seed", range(10))
def test_fps_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    k = int(rng.integers(1, n + 1))
    points = rng.normal(size=(n, 3))
    assert farthest_point_sample(points, k) == greedy_max_min(points, k)


def test_soft_assign_sharp_temperature():
    coarse = np.array([[1.0, 0.0], [0.0, 1.0]])
    fine = np.array([[1.0, 0.0]])
    with precision("float64"):
        p = soft_assign(fine, coarse, tau=1e-3)
    assert np.allclose(p, [[1.0, 0.0]])


def test_soft_assign_uniform_rows():
    coarse = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    p = soft_assign(np.array([[0.0, 1.0], [2.0, 0.0]]), coarse)
    assert np.allclose(p, 1 / 3)


def test_soft_assign_is_scale_invariant():
    rng = np.random.default_rng(1)
    fine, coarse = rng.normal(size=(5, 4)), rng.normal(size=(3, 4))
    scales = np.array([[0.1], [1.0], [3.0], [7.5], [100.0]])
    with precision("float64"):
        a = soft_assign(fine, coarse)
        b = soft_assign(fine * scales, coarse)
    assert np.allclose(a, b)
    assert np.array_equal(a.argmax(axis=1), b.argmax(axis=1))
    assert np.allclose(a.sum(axis=1), 1.0)


def test_pool_tokens_zero_mlp_is_identity():
    rng = np.random.default_rng(2)
    fine = rng.normal(size=(4, 3)).astype(np.float32)
    coarse = fine[[0, 2]]
    p = soft_assign(fine, coarse)
    assert np.array_equal(pool_tokens(fine, coarse, p, _zero), coarse)


def test_pooled_mean_hand_examples():
    with precision("float64"):
        hard = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        pooled = pooled_mean(np.array([[2.0], [4.0], [9.0]]), hard)
        assert np.allclose(pooled, [[3.0], [9.0]], atol=1e-5)

        soft = np.array([[0.3, 0.7], [0.6, 0.4]])
        constant = pooled_mean(np.full((2, 3), 5.0), soft)
        assert np.allclose(constant, 5.0, atol=1e-5)


def test_compose_segmentation_examples():
    two = SegmentationMap(np.array([[0, 1]]), 2)
    identity = compose_segmentation(two, np.eye(2))
    assert np.array_equal(identity.labels, [[0, 1]])

    collapsed = compose_segmentation(two, np.array([[0.2, 0.8], [0.1, 0.9]]))
    assert np.array_equal(collapsed.labels, [[1, 1]])
    assert collapsed.n_segments == 2

    into_first = compose_segmentation(two, np.array([[0.9, 0.1], [0.7, 0.3]]))
    assert np.array_equal(into_first.labels, [[0, 0]])


def test_hard_matrix_ties_to_lowest():
    assert np.array_equal(hard_matrix(np.array([[0.5, 0.5], [0.2, 0.8]])), [[1, 0], [0, 1]])


def test_unpool_examples():
    with precision("float64"):
        coarse = np.array([[4.0], [8.0]])
        assert np.allclose(unpool_tokens(coarse, np.array([[0.25, 0.75]])), [[7.0]])
        assert np.allclose(unpool_tokens(coarse, np.full((3, 2), 0.5)), 6.0)
        one_hot = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(unpool_tokens(coarse, one_hot), [[8.0], [4.0], [8.0]])


def test_unpool_inverts_hard_pooling_for_constant_groups():
    with precision("float64"):
        hard = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        fine = np.array([[2.0, 1.0], [2.0, 1.0], [5.0, -1.0]])
        pooled = pooled_mean(fine, hard)
        assert np.allclose(unpool_tokens(pooled, hard), fine, atol=1e-5)


def test_skip_fuse_examples():
    a = np.array([[1.0, 2.0]], dtype=np.float32)
    b = np.array([[3.0, -1.0]], dtype=np.float32)
    assert np.array_equal(skip_fuse(a, np.zeros_like(a), _identity), a)
    assert np.array_equal(skip_fuse(a, b, _identity), [[4.0, 1.0]])
    assert np.array_equal(skip_fuse(a, b, _zero), [[0.0, 0.0]])


def test_compose_soft_examples():
    p = np.array([[0.3, 0.7], [0.5, 0.5]])
    assert compose_soft([p]) is p
    assert np.array_equal(compose_soft([np.eye(2), np.eye(2)]), np.eye(2))
    uniform = np.full((2, 2), 0.5)
    assert np.allclose(compose_soft([uniform, uniform]), uniform)
    assert np.array_equal(compose_soft([], n0=3), np.eye(3))


def test_compose_soft_stays_row_stochastic():
    rng = np.random.default_rng(4)
    chain = [ops.softmax_rows(rng.normal(size=(n, m))) for n, m in [(8, 5), (5, 3), (3, 2)]]
    assert np.allclose(compose_soft(chain).sum(axis=1), 1.0, atol=1e-5)


def test_project_spatial_examples():
    with precision("float64"):
        token = np.array([[1.5, -2.0]])
        single = project_spatial(np.zeros((2, 2), dtype=int), np.eye(1), token)
        assert np.allclose(single, np.repeat(token, 4, axis=0))

        two_pixels = np.array([[0, 1]])
        mixed = project_spatial(two_pixels, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[2.0], [4.0]]))
        assert np.allclose(mixed, [[3.0], [3.0]])

        hard = project_spatial(SegmentationMap(two_pixels, 2), np.eye(2), np.array([[2.0], [4.0]]))
        assert np.allclose(hard, [[2.0], [4.0]])


def test_nested_partitions_over_levels():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 6, size=(6, 6))
    s = SegmentationMap(labels, 6)
    for n_coarse in (4, 2, 1):
        p = ops.softmax_rows(rng.normal(size=(s.n_segments, n_coarse)))
        coarse = compose_segmentation(s, p)
        assert s.is_nested_in(coarse)
        assert np.array_equal(coarse.matrix().sum(axis=1), np.ones(36))
        s = coarse


@pytest.mark.parametrize("seed", range(5))
def test_hierarchy_gradients(seed):
    """Assignment, pooling, unpooling and projection end to end."""
    rng = np.random.default_rng(seed)
    n_fine, n_coarse, d = 5, 2, 3
    named = {"fine": rng.normal(size=(n_fine, d)), "encoder": rng.normal(size=(n_fine, d))}
    seeds = [0, 3]
    grid = rng.integers(0, n_fine, size=(2, 3))
    weights = rng.normal(size=(6, d))

    def f(p):
        coarse_init = ops.index(p["fine"], np.asarray(seeds))
        assignment = soft_assign(p["fine"], coarse_init)
        coarse = pool_tokens(p["fine"], coarse_init, assignment, ops.gelu)
        fused = skip_fuse(unpool_tokens(coarse, assignment), p["encoder"], ops.softplus)
        spatial = project_spatial(grid, np.eye(n_fine), fused)
        return ops.sum(ops.mul(spatial, weights))

    report = grad_check(f, named)
    assert report.passed, report
