"""Named parameter collections."""
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.stats import truncnorm

from segdepth.core.node import NumericFailure
from segdepth.core.precision import get_dtype
from segdepth.core.rng import Rng
from segdepth.model.layers import Init, Spec

logger = logging.getLogger(__name__)


#: Standard deviation of the truncated normal init
INIT_STD = 0.02

#: Truncation at ±2σ
INIT_TRUNCATION = 2.0


@dataclass
class ModelParams:
    """Network parameters by unique dotted name, e.g. `encoder.stage0.block1.qkv.weight`."""

    arrays: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)

    def names(self) -> list[str]:
        return list(self.arrays)

    def count(self, prefix: str = "") -> int:
        """Scalar parameter count, optionally under a name prefix."""
        return sum(a.size for name, a in self.arrays.items() if name.startswith(prefix))

    def groups(self) -> dict[str, list[str]]:
        """Parameter names by group, the name up to the last two dotted parts.

        `encoder.stage0.block1.qkv.weight` belongs to `encoder.stage0.block1`.
        """
        result: dict[str, list[str]] = {}
        for name in self.arrays:
            parts = name.split(".")
            group = ".".join(parts[:-2]) if len(parts) > 2 else parts[0]
            result.setdefault(group, []).append(name)
        return result

    def copy(self) -> "ModelParams":
        return ModelParams({name: a.copy() for name, a in self.arrays.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({name: a.astype(dtype) for name, a in self.arrays.items()})

    def assert_finite(self):
        """:raise NumericFailure: if any parameter holds NaN or Inf"""
        for name, a in self.arrays.items():
            if not np.all(np.isfinite(a)):
                raise NumericFailure(f"Parameter {name} is not finite")

    def perturbed(self, seed: int, scale: float = 0.02) -> "ModelParams":
        """Copy with every entry jittered, so zero-initialised tensors carry signal."""
        rng = Rng(seed).child("perturb")
        return ModelParams({
            name: (a + rng.child(name).normal(0, scale, a.shape)).astype(a.dtype)
            for name, a in self.arrays.items()
        })


def init_params(spec: Spec, seed: int) -> ModelParams:
    """Create parameters for a declaration.

    Every tensor draws from its own child stream named after the parameter,
    so adding a parameter does not change the others.
    """
    rng = Rng(seed).child("params")
    dtype = get_dtype()
    arrays = {}
    for name, declaration in spec.items():
        match declaration.init:
            case Init.zeros:
                value = np.zeros(declaration.shape, dtype=dtype)
            case Init.ones:
                value = np.ones(declaration.shape, dtype=dtype)
            case Init.normal:
                value = truncnorm.rvs(
                    -INIT_TRUNCATION,
                    INIT_TRUNCATION,
                    scale=INIT_STD,
                    size=declaration.shape,
                    random_state=rng.child(name).generator,
                ).astype(dtype)
            case _:
                raise AssertionError(f"Unknown init {declaration.init}")
        arrays[name] = value
    logger.debug("Initialised %d tensors, %d scalars", len(arrays), sum(a.size for a in arrays.values()))
    return ModelParams(arrays)
