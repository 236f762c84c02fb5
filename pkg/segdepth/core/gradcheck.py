"""Finite-difference gradient checks.

Compare tape gradients against central differences
`(f(x + h e_i) - f(x - h e_i)) / 2h` coordinate by coordinate.
Checks always run in 64-bit precision.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from dataclasses_json import dataclass_json

from segdepth.core.node import DiffNode, NumericFailure, Tape
from segdepth.core.ops import value_of
from segdepth.core.precision import precision
from segdepth.core.rng import Rng

logger = logging.getLogger(__name__)


#: Checked function input, a single array or named arrays
CheckInput = Union[np.ndarray, dict[str, np.ndarray]]


@dataclass_json
@dataclass
class GradCheckReport:
    """Outcome of one gradient check."""

    #: Largest relative error over checked coordinates
    max_rel_err: float

    #: max_rel_err below the tolerance
    passed: bool

    #: How many coordinates were compared
    checked: int

    #: Coordinate with the largest error, as `name[flat index]`
    worst: str = ""


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    """|a - n| / max(|a|, |n|, floor)"""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _evaluate(f: Callable, inputs) -> float:
    value = value_of(f(inputs))
    assert value.size == 1, f"Checked function must be scalar valued, got shape {value.shape}"
    result = float(value.reshape(()))
    if not np.isfinite(result):
        raise NumericFailure(f"Checked function is not finite: {result}")
    return result


def grad_check(
        f: Callable,
        x: CheckInput,
        h: float = 1e-4,
        tol: float = 1e-4,
        max_coordinates: Optional[int] = None,
        seed: int = 0,
        floor: float = 1e-6,
) -> GradCheckReport:
    """Check reverse-mode gradients of a scalar function.

    `f` is called once with tape leaves to get the analytic gradient and then
    with plain arrays for every finite difference.

    :param f:
        Scalar valued function of one array, or of a dict of named arrays

    :param x:
        Point to check at

    :param max_coordinates:
        Check a random subset of this many coordinates per array. Checks everything if not given.

    :raise NumericFailure:
        If f(x) or any perturbed evaluation is not finite
    """
    with precision("float64"):
        single = not isinstance(x, dict)
        arrays = {"x": x} if single else x
        arrays = {name: np.array(value, dtype=np.float64) for name, value in arrays.items()}

        def call(named):
            return f(named["x"]) if single else f(named)

        tape = Tape()
        leaves = tape.watch(arrays)
        root = call(leaves)
        if not isinstance(root, DiffNode):
            raise NumericFailure("Checked function does not depend on its input")
        _evaluate(lambda _: root, None)
        tape.backward(root)
        analytic = tape.gradients(leaves)

        rng = Rng(seed).child("grad-check")
        worst_err = 0.0
        worst = ""
        checked = 0
        for name, base in arrays.items():
            coordinates = np.arange(base.size)
            if max_coordinates is not None and base.size > max_coordinates:
                coordinates = np.sort(rng.child(name).permutation(base.size)[:max_coordinates])

            for i in coordinates:
                plus = dict(arrays)
                minus = dict(arrays)
                plus[name] = base.copy()
                minus[name] = base.copy()
                plus[name].flat[i] += h
                minus[name].flat[i] -= h
                numeric = (_evaluate(call, plus) - _evaluate(call, minus)) / (2 * h)
                err = relative_error(float(analytic[name].flat[i]), numeric, floor)
                checked += 1
                if err > worst_err:
                    worst_err = err
                    worst = f"{name}[{i}]"

        logger.debug("Gradient check over %d coordinates, max relative error %g at %s", checked, worst_err, worst)
        return GradCheckReport(max_rel_err=worst_err, passed=worst_err < tol, checked=checked, worst=worst)
