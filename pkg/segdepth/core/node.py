"""Reverse-mode differentiation tape.

A :py:class:`Tape` records every :py:class:`DiffNode` created during a forward
pass in creation order. Creation order is a topological order of the
computation graph, so the backward pass is a single reverse sweep over the
recorded nodes.

One tape serves exactly one forward/backward pass and is used from one thread.
Independent passes run on independent tapes.
"""
import logging
from typing import Callable, Optional, Sequence

import numpy as np

from segdepth.core.precision import as_array

logger = logging.getLogger(__name__)


#: Maps an output gradient to one gradient per parent (None where a parent needs no gradient)
BackwardFunction = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class NumericFailure(Exception):
    """Non-finite values entered a loss, a gradient or a parameter update."""


class DiffNode:
    """A value on the tape with its accumulated gradient."""

    __array_priority__ = 1000

    def __init__(
            self,
            tape: "Tape",
            value: np.ndarray,
            parents: Sequence[Optional["DiffNode"]] = (),
            backward: Optional[BackwardFunction] = None,
            name: Optional[str] = None,
    ):
        self.tape = tape
        self.value = value
        self.parents = tuple(parents)
        self.backward_fn = backward
        self.name = name

        #: Accumulated gradient, same shape as value. None until something flows in.
        self.grad: Optional[np.ndarray] = None

        #: Leaves always need gradients, interior nodes when any parent does
        self.needs_grad = backward is None or any(p is not None and p.needs_grad for p in self.parents)

    def __repr__(self):
        label = self.name or "node"
        return f"<DiffNode {label} shape:{self.value.shape} dtype:{self.value.dtype}>"

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def accumulate(self, grad: np.ndarray):
        """Add a gradient contribution. Leaves used twice receive the sum of both paths."""
        assert grad.shape == self.value.shape, f"Gradient shape {grad.shape} does not match value shape {self.value.shape} for {self}"
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.value.dtype, copy=True)
        else:
            self.grad += grad

    # Operators delegate to segdepth.core.ops

    def __add__(self, other):
        from segdepth.core import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from segdepth.core import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from segdepth.core import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from segdepth.core import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from segdepth.core import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from segdepth.core import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from segdepth.core import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from segdepth.core import ops
        return ops.div(other, self)

    def __neg__(self):
        from segdepth.core import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from segdepth.core import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from segdepth.core import ops
        return ops.matmul(other, self)

    def __getitem__(self, key):
        from segdepth.core import ops
        return ops.index(self, key)

    @property
    def T(self) -> "DiffNode":
        from segdepth.core import ops
        return ops.transpose(self)

    def reshape(self, *shape) -> "DiffNode":
        from segdepth.core import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sum(self, axis=None, keepdims=False) -> "DiffNode":
        from segdepth.core import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False) -> "DiffNode":
        from segdepth.core import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


class Tape:
    """Records differentiable operations of one forward pass."""

    def __init__(self):
        self.nodes: list[DiffNode] = []

    def __repr__(self):
        return f"<Tape with {len(self.nodes)} nodes>"

    def leaf(self, value, name: Optional[str] = None) -> DiffNode:
        """Register an input that receives gradients."""
        node = DiffNode(self, as_array(value), name=name)
        self.nodes.append(node)
        return node

    def watch(self, arrays: dict[str, np.ndarray]) -> dict[str, DiffNode]:
        """Register a named collection of parameters as leaves."""
        return {name: self.leaf(value, name=name) for name, value in arrays.items()}

    def record(
            self,
            value: np.ndarray,
            parents: Sequence[Optional[DiffNode]],
            backward: BackwardFunction,
            name: Optional[str] = None,
    ) -> DiffNode:
        """Register the result of an operation."""
        node = DiffNode(self, value, parents, backward, name=name)
        self.nodes.append(node)
        return node

    def backward(self, root: DiffNode, seed: Optional[np.ndarray] = None):
        """Run the reverse sweep from a scalar root.

        :param seed:
            Output gradient. Defaults to one for a scalar root.
        """
        assert root.tape is self, "Root node belongs to a different tape"
        if seed is None:
            assert root.value.size == 1, f"Backward from a non-scalar root needs an explicit seed, got shape {root.shape}"
            seed = np.ones_like(root.value)

        if not np.all(np.isfinite(root.value)):
            raise NumericFailure(f"Backward pass started from a non-finite value: {root.value}")

        root.accumulate(seed)

        for node in reversed(self.nodes):
            if node.grad is None or node.backward_fn is None or not node.needs_grad:
                continue
            parent_grads = node.backward_fn(node.grad)
            for parent, grad in zip(node.parents, parent_grads):
                if parent is None or grad is None or not parent.needs_grad:
                    continue
                parent.accumulate(grad)

    def gradients(self, leaves: dict[str, DiffNode]) -> dict[str, np.ndarray]:
        """Collect leaf gradients, zeros for leaves nothing flowed into."""
        return {
            name: node.grad if node.grad is not None else np.zeros_like(node.value)
            for name, node in leaves.items()
        }
