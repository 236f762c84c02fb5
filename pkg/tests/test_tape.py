"""Tape, precision mode and random streams."""
import numpy as np
import pytest

from segdepth.core import ops
from segdepth.core.node import NumericFailure, Tape
from segdepth.core.precision import get_dtype, precision
from segdepth.core.rng import Rng


def test_leaf_used_twice_accumulates():
    """f(x) = x + x has gradient 2."""
    with precision("float64"):
        tape = Tape()
        x = tape.leaf([1.0, -3.0])
        y = ops.sum(ops.add(x, x))
        tape.backward(y)
        assert np.array_equal(x.grad, [2.0, 2.0])


def test_operators_delegate_to_ops():
    with precision("float64"):
        tape = Tape()
        x = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
        y = ((x * 2 - 1) / 2).sum()
        tape.backward(y)
        assert y.value == pytest.approx(8.0)
        assert np.allclose(x.grad, 1.0)


def test_plain_arrays_skip_the_tape():
    """Without any node the result is a plain array."""
    out = ops.add(np.ones(3), np.ones(3))
    assert isinstance(out, np.ndarray)
    assert out.dtype == np.float32


def test_unused_leaf_gets_zero_gradient():
    tape = Tape()
    leaves = tape.watch({"a": np.ones(2), "b": np.ones(3)})
    tape.backward(ops.sum(leaves["a"]))
    grads = tape.gradients(leaves)
    assert np.array_equal(grads["b"], np.zeros(3))
    assert np.array_equal(grads["a"], np.ones(2))


def test_backward_from_nan_raises():
    tape = Tape()
    x = tape.leaf([-1.0])
    with pytest.raises(NumericFailure):
        tape.backward(ops.sum(ops.log(x)))


def test_precision_context_restores():
    assert get_dtype() == np.float32
    with precision("float64") as dtype:
        assert dtype == np.float64
        assert ops.value_of(1.0).dtype == np.float64
    assert get_dtype() == np.float32


def test_rng_is_reproducible():
    a = Rng(7).child("layout").uniform(size=5)
    b = Rng(7).child("layout").uniform(size=5)
    assert np.array_equal(a, b)


def test_rng_children_are_independent_of_draw_order():
    parent = Rng(3)
    parent.uniform(size=100)
    first = parent.child("a").normal(size=4)
    second = Rng(3).child("a").normal(size=4)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, Rng(3).child("b").normal(size=4))
