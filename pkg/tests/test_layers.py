"""Attention blocks, convolutions and the stem."""
import numpy as np
import pytest

from segdepth.core import ops
from segdepth.core.gradcheck import grad_check
from segdepth.core.precision import precision
from segdepth.model.backbone import downsample_labels, init_segment_tokens, sinusoidal_pos_embed, stem_forward, stem_spec
from segdepth.model.layers import attention_block, attention_block_spec, conv2d, conv2d_spec
from segdepth.model.params import init_params
from segdepth.testing.oracles import naive_attention_block, naive_conv2d


def _random_block(width: int, seed: int, mlp_ratio: int = 2) -> dict[str, np.ndarray]:
    """Block parameters with every tensor random, so no path is trivially zero."""
    rng = np.random.default_rng(seed)
    spec = attention_block_spec("block", width, mlp_ratio)
    return {name: rng.normal(0, 0.5, declaration.shape) for name, declaration in spec.items()}


def test_attention_block_zero_weights_is_identity():
    spec = attention_block_spec("block", 8)
    params = {name: np.zeros(declaration.shape, dtype=np.float32) for name, declaration in spec.items()}
    tokens = np.random.default_rng(0).normal(size=(5, 8)).astype(np.float32)
    out = attention_block(tokens, params, "block", heads=2)
    assert np.array_equal(out, tokens)


def test_attention_block_matches_loop_oracle():
    """Random 3×4 tokens, one head."""
    with precision("float64"):
        params = _random_block(4, seed=1)
        tokens = np.random.default_rng(2).normal(size=(3, 4))
        out = attention_block(tokens, params, "block", heads=1)
        assert np.allclose(out, naive_attention_block(tokens, params, "block", heads=1), atol=1e-6)


def test_attention_block_multi_head_matches_loop_oracle():
    with precision("float64"):
        params = _random_block(8, seed=3)
        tokens = np.random.default_rng(4).normal(size=(6, 8))
        out = attention_block(tokens, params, "block", heads=4)
        assert np.allclose(out, naive_attention_block(tokens, params, "block", heads=4), atol=1e-6)


def test_attention_block_single_token():
    """One token attends to itself with weight 1."""
    with precision("float64"):
        params = _random_block(4, seed=5)
        token = np.random.default_rng(6).normal(size=(1, 4))
        out = attention_block(token, params, "block", heads=2)
        assert np.allclose(out, naive_attention_block(token, params, "block", heads=2), atol=1e-9)


def test_attention_block_rejects_wrong_width():
    params = _random_block(8, seed=0)
    with pytest.raises(AssertionError):
        attention_block(np.zeros((3, 4)), params, "block", heads=2)


@pytest.mark.parametrize("seed", range(3))
def test_attention_block_gradients(seed):
    params = _random_block(4, seed=seed)
    tokens = np.random.default_rng(seed + 10).normal(size=(3, 4))
    weights = np.random.default_rng(seed + 20).normal(size=(3, 4))

    def f(named):
        return ops.sum(ops.mul(attention_block(named["tokens"], named, "block", heads=2), weights))

    report = grad_check(f, {"tokens": tokens} | params, max_coordinates=6)
    assert report.passed, report


@pytest.mark.parametrize("stride", [1, 2])
def test_conv2d_matches_loop_oracle(stride):
    with precision("float64"):
        rng = np.random.default_rng(stride)
        x = rng.normal(size=(8, 8, 3))
        params = {"conv.weight": rng.normal(size=(3, 3, 3, 4)), "conv.bias": rng.normal(size=4)}
        out = conv2d(params, "conv", x, stride=stride)
        expected = naive_conv2d(x, params["conv.weight"], params["conv.bias"], stride)
        assert out.shape == expected.shape
        assert np.allclose(out, expected, atol=1e-6)


def test_conv2d_gradients():
    rng = np.random.default_rng(9)
    named = {
        "x": rng.normal(size=(5, 4, 2)),
        "conv.weight": rng.normal(size=(3, 3, 2, 3)),
        "conv.bias": rng.normal(size=3),
    }
    weights = rng.normal(size=(3, 2, 3))
    report = grad_check(lambda p: ops.sum(ops.mul(conv2d(p, "conv", p["x"], stride=2), weights)), named)
    assert report.passed, report


def test_stem_shapes():
    params = init_params(stem_spec(64), seed=0)
    features = stem_forward(np.random.default_rng(0).uniform(size=(96, 96, 3)).astype(np.float32), params)
    assert features.f4.shape == (24, 24, 32)
    assert features.f8.shape == (12, 12, 64)


def test_stem_zero_image_zero_bias():
    params = init_params(stem_spec(16), seed=0)
    features = stem_forward(np.zeros((16, 16, 3), dtype=np.float32), params)
    assert np.array_equal(features.f8, np.zeros((2, 2, 16)))


def test_stem_rejects_indivisible_size():
    params = init_params(stem_spec(16), seed=0)
    with pytest.raises(AssertionError):
        stem_forward(np.zeros((12, 16, 3)), params)


def test_sinusoidal_pos_embed():
    embed = sinusoidal_pos_embed(3, 2, 8)
    assert embed.shape == (6, 8)
    assert np.abs(embed).max() <= 1.0
    origin = embed[0]
    assert np.allclose(origin[[0, 1, 4, 5]], 0.0)
    assert np.allclose(origin[[2, 3, 6, 7]], 1.0)
    # Position (1, 0) is cell 2 in row-major order, lowest frequency sin channel is the first
    assert embed[2, 0] == pytest.approx(np.sin(1.0), abs=1e-6)


def test_sinusoidal_pos_embed_width():
    with pytest.raises(AssertionError):
        sinusoidal_pos_embed(2, 2, 6)


def test_downsample_labels_majority_and_ties():
    labels = np.zeros((2, 4), dtype=int)
    labels[:, 1] = 1
    labels[:, 2:] = 2
    labels[1, 3] = 3
    grid = downsample_labels(labels, 2)
    # Window 0 ties between 0 and 1, window 1 has three pixels of 2
    assert np.array_equal(grid, [[0, 2]])


def test_init_segment_tokens_hand_average():
    """Features [1, 3, 5, 7] on a 1×4 grid with labels [0, 0, 1, 1] pool to [2, 6]."""
    with precision("float64"):
        f8 = np.array([[[1.0], [3.0], [5.0], [7.0]]]).repeat(4, axis=2)
        tokens = init_segment_tokens(f8, np.array([[0, 0, 1, 1]]), 2, add_positions=False)
        assert not tokens.has_class_token
        assert np.allclose(tokens.segments(), [[2.0] * 4, [6.0] * 4])


def test_init_segment_tokens_with_class_token():
    f8 = np.full((2, 2, 4), 3.0, dtype=np.float32)
    class_token = np.full((1, 4), -1.0, dtype=np.float32)
    tokens = init_segment_tokens(f8, np.zeros((2, 2), dtype=int), 1, class_token=class_token, add_positions=False)
    assert tokens.rows == 2
    assert np.array_equal(tokens.class_token(), class_token)
    assert np.allclose(tokens.segments(), 3.0)


def test_init_segment_tokens_equivariance():
    rng = np.random.default_rng(1)
    f8 = rng.normal(size=(3, 3, 4))
    labels = rng.integers(0, 4, size=(3, 3))
    permutation = np.array([2, 0, 3, 1])
    base = init_segment_tokens(f8, labels, 4).tokens
    permuted = init_segment_tokens(f8, permutation[labels], 4).tokens
    assert np.allclose(permuted[permutation], base)


def test_init_segment_tokens_mass_preserving():
    rng = np.random.default_rng(2)
    f8 = rng.normal(size=(4, 4, 4))
    labels = np.repeat(np.arange(4), 4).reshape(4, 4)
    tokens = init_segment_tokens(f8, labels, 4, add_positions=False).tokens
    counts = np.bincount(labels.ravel(), minlength=4)
    assert np.allclose((counts[:, None] * tokens).sum(axis=0), f8.reshape(-1, 4).sum(axis=0), atol=1e-4)
