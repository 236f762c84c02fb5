"""Differentiable operations.

Every operation accepts :py:class:`DiffNode` or plain array operands.
When at least one operand is a node the result is recorded on that node's
tape, otherwise the plain numpy result is returned. This lets the same model
code run with and without gradient tracking.

Backward functions receive the output gradient and return one gradient per
operand, in operand order.
"""
from typing import Optional, Sequence, Union

import numpy as np

from segdepth.core.node import DiffNode, Tape
from segdepth.core.precision import as_array


#: Anything an operation accepts as a differentiable operand
Operand = Union[DiffNode, np.ndarray, float, int]

#: sqrt(2 / pi) of the tanh GELU approximation
GELU_SCALE = 0.7978845608028654

GELU_CUBIC = 0.044715


def value_of(x: Operand) -> np.ndarray:
    """Raw array behind an operand."""
    if isinstance(x, DiffNode):
        return x.value
    return as_array(x)


def _tape_of(operands: Sequence[Operand]) -> Optional[Tape]:
    for x in operands:
        if isinstance(x, DiffNode):
            return x.tape
    return None


def _emit(value: np.ndarray, operands: Sequence[Operand], backward, name: Optional[str] = None) -> Union[DiffNode, np.ndarray]:
    tape = _tape_of(operands)
    if tape is None:
        return value
    parents = [x if isinstance(x, DiffNode) else None for x in operands]
    for p in parents:
        if p is not None:
            assert p.tape is tape, f"Operands from different tapes: {p}"
    return tape.record(value, parents, backward, name=name)


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back to the operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a: Operand, b: Operand):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return unbroadcast(g, av.shape), unbroadcast(g, bv.shape)

    return _emit(av + bv, (a, b), backward)


def sub(a: Operand, b: Operand):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return unbroadcast(g, av.shape), unbroadcast(-g, bv.shape)

    return _emit(av - bv, (a, b), backward)


def mul(a: Operand, b: Operand):
    av, bv = value_of(a), value_of(b)

    def backward(g):
        return unbroadcast(g * bv, av.shape), unbroadcast(g * av, bv.shape)

    return _emit(av * bv, (a, b), backward)


def div(a: Operand, b: Operand):
    av, bv = value_of(a), value_of(b)
    out = av / bv

    def backward(g):
        return unbroadcast(g / bv, av.shape), unbroadcast(-g * out / bv, bv.shape)

    return _emit(out, (a, b), backward)


def neg(a: Operand):
    return _emit(-value_of(a), (a,), lambda g: (-g,))


def matmul(a: Operand, b: Operand):
    """Matrix product, 2-D or batched with numpy broadcasting."""
    av, bv = value_of(a), value_of(b)
    assert av.ndim >= 2 and bv.ndim >= 2, f"matmul needs matrices, got {av.shape} and {bv.shape}"
    assert av.shape[-1] == bv.shape[-2], f"matmul shape mismatch {av.shape} @ {bv.shape}"

    def backward(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return unbroadcast(ga, av.shape), unbroadcast(gb, bv.shape)

    return _emit(av @ bv, (a, b), backward)


# Shape manipulation


def transpose(a: Operand, axes: Optional[Sequence[int]] = None):
    av = value_of(a)
    if axes is None:
        axes = tuple(reversed(range(av.ndim)))
    inverse = tuple(np.argsort(axes))
    return _emit(np.transpose(av, axes), (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a: Operand, shape: Sequence[int]):
    av = value_of(a)
    return _emit(av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


def index(a: Operand, key):
    """Basic or advanced indexing. Repeated indices accumulate in backward."""
    av = value_of(a)

    def backward(g):
        grad = np.zeros_like(av)
        np.add.at(grad, key, g)
        return (grad,)

    return _emit(av[key], (a,), backward)


def gather(a: Operand, flat_index: np.ndarray):
    """Pick elements of the flattened operand by an integer index array of any shape."""
    av = value_of(a)
    flat_index = np.asarray(flat_index)
    assert np.issubdtype(flat_index.dtype, np.integer), f"gather needs integer indices, got {flat_index.dtype}"

    def backward(g):
        grad = np.bincount(flat_index.ravel(), weights=g.ravel(), minlength=av.size)
        return (grad.astype(av.dtype, copy=False).reshape(av.shape),)

    return _emit(av.reshape(-1)[flat_index], (a,), backward)


def concat(operands: Sequence[Operand], axis: int = 0):
    values = [value_of(x) for x in operands]
    out = np.concatenate(values, axis=axis)
    boundaries = np.cumsum([v.shape[axis] for v in values])[:-1]

    def backward(g):
        return tuple(np.split(g, boundaries, axis=axis))

    return _emit(out, tuple(operands), backward)


# Reductions


def sum(a: Operand, axis=None, keepdims: bool = False):
    av = value_of(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape),)

    return _emit(np.sum(av, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Operand, axis=None, keepdims: bool = False):
    av = value_of(a)
    count = av.size if axis is None else np.prod([av.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def segment_mean(a: Operand, labels: np.ndarray, n_segments: int):
    """Average rows of `a` per segment label.

    A segment without rows receives the mean of all rows.

    :param a:
        Rows to pool, shape (cells, d)

    :param labels:
        Segment id per row, shape (cells,)

    :return:
        Pooled rows, shape (n_segments, d)
    """
    av = value_of(a)
    labels = np.asarray(labels)
    cells = av.shape[0]
    assert labels.shape == (cells,), f"Need one label per row, got {labels.shape} for {av.shape}"
    assert labels.min() >= 0 and labels.max() < n_segments, f"Labels out of range for {n_segments} segments"

    counts = np.bincount(labels, minlength=n_segments)
    empty = counts == 0
    sums = np.zeros((n_segments,) + av.shape[1:], dtype=av.dtype)
    np.add.at(sums, labels, av)
    safe_counts = np.maximum(counts, 1).astype(av.dtype)
    out = sums / safe_counts.reshape((-1,) + (1,) * (av.ndim - 1))
    if empty.any():
        out[empty] = av.mean(axis=0)

    def backward(g):
        per_row = g / safe_counts.reshape((-1,) + (1,) * (av.ndim - 1))
        grad = per_row[labels]
        if empty.any():
            grad = grad + g[empty].sum(axis=0) / cells
        return (grad,)

    return _emit(out, (a,), backward)


# Elementwise functions


def exp(a: Operand):
    out = np.exp(value_of(a))
    return _emit(out, (a,), lambda g: (g * out,))


def log(a: Operand):
    av = value_of(a)
    return _emit(np.log(av), (a,), lambda g: (g / av,))


def sqrt(a: Operand):
    out = np.sqrt(value_of(a))
    return _emit(out, (a,), lambda g: (g * 0.5 / out,))


def clip(a: Operand, low: Optional[float], high: Optional[float]):
    """Clamp values. Gradient passes where the input is inside the closed range."""
    av = value_of(a)
    inside = np.ones(av.shape, dtype=bool)
    if low is not None:
        inside &= av >= low
    if high is not None:
        inside &= av <= high
    return _emit(np.clip(av, low, high), (a,), lambda g: (g * inside,))


def gelu(a: Operand):
    """GELU, tanh approximation."""
    x = value_of(a)
    inner = GELU_SCALE * (x + GELU_CUBIC * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1 + t)

    def backward(g):
        d_inner = GELU_SCALE * (1 + 3 * GELU_CUBIC * x ** 2)
        return (g * (0.5 * (1 + t) + 0.5 * x * (1 - t ** 2) * d_inner),)

    return _emit(out, (a,), backward)


def softplus(a: Operand):
    x = value_of(a)
    out = np.logaddexp(0, x).astype(x.dtype, copy=False)

    def backward(g):
        sigmoid = np.exp(-np.logaddexp(0, -x)).astype(x.dtype, copy=False)
        return (g * sigmoid,)

    return _emit(out, (a,), backward)


# Normalisations


def softmax_rows(a: Operand):
    """Softmax over the last axis with row-max subtraction."""
    x = value_of(a)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _emit(out, (a,), backward)


def layer_norm(a: Operand, gain: Operand, bias: Operand, eps: float = 1e-5):
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    assert eps > 0, f"eps must be positive, got {eps}"
    x, gv, bv = value_of(a), value_of(gain), value_of(bias)
    assert x.shape[-1] == gv.shape[-1] == bv.shape[-1], f"layer_norm width mismatch {x.shape} {gv.shape} {bv.shape}"
    width = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    centred = x - mu
    var = (centred ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centred * inv_std
    out = x_hat * gv + bv

    def backward(g):
        d_hat = g * gv
        dx = inv_std / width * (
            width * d_hat
            - d_hat.sum(axis=-1, keepdims=True)
            - x_hat * (d_hat * x_hat).sum(axis=-1, keepdims=True)
        )
        d_gain = unbroadcast(g * x_hat, gv.shape)
        d_bias = unbroadcast(g, bv.shape)
        return dx, d_gain, d_bias

    return _emit(out, (a, gain, bias), backward)


def normalize_rows(a: Operand, eps: float = 1e-8):
    """Scale rows of the last axis to unit length, norms below eps are treated as eps."""
    x = value_of(a)
    norm = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    above = norm > eps
    denom = np.where(above, norm, eps).astype(x.dtype, copy=False)
    out = x / denom

    def backward(g):
        radial = (g * out).sum(axis=-1, keepdims=True)
        return (np.where(above, (g - out * radial) / denom, g / denom),)

    return _emit(out, (a,), backward)
