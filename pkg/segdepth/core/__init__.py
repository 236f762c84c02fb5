"""Dense-array and reverse-mode differentiation core.

- Arrays are plain :py:class:`numpy.ndarray` values in the dtype selected by
  :py:mod:`segdepth.core.precision`

- :py:class:`segdepth.core.node.Tape` records differentiable operations
  from :py:mod:`segdepth.core.ops` and runs the backward pass

- :py:mod:`segdepth.core.gradcheck` compares tape gradients against
  central differences
"""
