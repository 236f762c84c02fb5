"""Global floating point precision mode.

Training runs in 32-bit, gradient checks in 64-bit.
"""
import contextlib
from typing import Iterator

import numpy as np


#: The dtype new arrays are created in
_current_dtype: np.dtype = np.dtype(np.float32)


def get_dtype() -> np.dtype:
    """The dtype of the active precision mode."""
    return _current_dtype


def set_precision(dtype: str | type | np.dtype):
    """Switch the global precision mode.

    :param dtype:
        `float32` or `float64`
    """
    global _current_dtype
    dtype = np.dtype(dtype)
    assert dtype in (np.float32, np.float64), f"Unsupported precision: {dtype}"
    _current_dtype = dtype


@contextlib.contextmanager
def precision(dtype: str | type | np.dtype) -> Iterator[np.dtype]:
    """Run a block under a different precision mode.

    .. code-block:: python

        with precision("float64"):
            report = grad_check(f, x)
    """
    previous = _current_dtype
    set_precision(dtype)
    try:
        yield _current_dtype
    finally:
        set_precision(previous)


def as_array(value) -> np.ndarray:
    """Convert to an array in the active precision."""
    return np.asarray(value, dtype=_current_dtype)
