"""Segment hierarchy operations.

The encoder coarsens tokens level by level:

1. Farthest point sampling picks initial coarse tokens among the fine ones
2. :py:func:`soft_assign` gives every fine token a membership distribution over coarse tokens
3. :py:func:`pool_tokens` refines coarse tokens with the membership-weighted fine mean
4. :py:func:`compose_segmentation` carries the pixel partition to the coarse level

The decoder reverses it with :py:func:`unpool_tokens`, :py:func:`skip_fuse`
and :py:func:`project_spatial`.

Hard assignments are bookkeeping only. Gradients flow through the soft
assignment matrices.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from segdepth.core import ops
from segdepth.core.ops import Operand
from segdepth.core.precision import get_dtype
from segdepth.vision.partition import SegmentationMap

logger = logging.getLogger(__name__)


#: Guards norms in cosine similarity
COSINE_EPS = 1e-8

#: Guards empty coarse columns in pooling
POOL_EPS = 1e-6

#: Token-wise transformation, an MLP in the network
TokenMap = Callable[[Operand], Operand]


@dataclass
class LevelState:
    """One level of the forward hierarchy."""

    #: Segment tokens as entering the level (pooled, or averaged stem features at level 0)
    z: Operand

    #: Segment tokens after the level's encoder blocks. Same as `z` at the coarsest level.
    z_out: Operand

    #: Pixel partition at this level
    s: SegmentationMap

    #: Soft assignment from the previous level, absent at level 0
    p: Optional[Operand] = None

    #: Indices of the fine tokens that seeded the coarse tokens
    seeds: Optional[list[int]] = None

    @property
    def n_segments(self) -> int:
        return self.s.n_segments


def farthest_point_sample(z: np.ndarray, k: int, start: Optional[int] = None) -> list[int]:
    """Greedy max-min selection of k rows.

    :param start:
        First pick. Defaults to the row with the largest L2 norm.

    :return:
        k distinct row indices in selection order. Ties go to the lowest index.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    assert 1 <= k <= n, f"Cannot sample {k} of {n} rows"
    if start is None:
        start = int(np.argmax((z * z).sum(axis=1)))
    assert 0 <= start < n, f"Start index {start} out of range"

    selected = [start]
    nearest = ((z - z[start]) ** 2).sum(axis=1)
    nearest[start] = -np.inf
    for _ in range(k - 1):
        pick = int(np.argmax(nearest))
        selected.append(pick)
        nearest = np.minimum(nearest, ((z - z[pick]) ** 2).sum(axis=1))
        nearest[selected] = -np.inf
    return selected


def soft_assign(z_fine: Operand, z_coarse: Operand, tau: float = 1.0):
    """Row softmax of cosine similarity over temperature.

    :return:
        n_fine×n_coarse row-stochastic matrix
    """
    assert tau > 0, f"tau must be positive, got {tau}"
    fine = ops.normalize_rows(z_fine, COSINE_EPS)
    coarse = ops.normalize_rows(z_coarse, COSINE_EPS)
    similarity = ops.matmul(fine, ops.transpose(coarse))
    return ops.softmax_rows(ops.mul(similarity, 1.0 / tau))


def pooled_mean(z_fine: Operand, p: Operand):
    """Membership weighted mean of fine tokens per coarse column, `Pᵀ Z ⊘ Pᵀ 1`."""
    mass = ops.add(ops.sum(p, axis=0, keepdims=True), POOL_EPS)
    return ops.div(ops.matmul(ops.transpose(p), z_fine), ops.transpose(mass))


def pool_tokens(z_fine: Operand, z_coarse_init: Operand, p: Operand, mlp: TokenMap):
    """Residual refinement of coarse tokens by pooled fine tokens."""
    fine_rows = ops.value_of(z_fine).shape[0]
    assert ops.value_of(p).shape == (fine_rows, ops.value_of(z_coarse_init).shape[0]), "Assignment shape mismatch"
    return ops.add(z_coarse_init, mlp(pooled_mean(z_fine, p)))


def harden(p: Operand) -> np.ndarray:
    """Row argmax of an assignment, ties to the lowest column."""
    return np.argmax(ops.value_of(p), axis=1)


def hard_matrix(p: Operand) -> np.ndarray:
    """One-hot P̄ of a soft assignment."""
    value = ops.value_of(p)
    result = np.zeros_like(value)
    result[np.arange(value.shape[0]), harden(value)] = 1
    return result


def compose_segmentation(s_prev: SegmentationMap, p: Operand) -> SegmentationMap:
    """S_l = S_(l-1) P̄_l on the label form of the partition."""
    value = ops.value_of(p)
    assert value.shape[0] == s_prev.n_segments, f"Assignment rows {value.shape[0]} do not match {s_prev.n_segments} segments"
    mapping = harden(value)
    return SegmentationMap(labels=mapping[s_prev.labels], n_segments=value.shape[1])


def unpool_tokens(z_coarse: Operand, p: Operand):
    """Distribute coarse tokens to fine segments, `P Z'`."""
    return ops.matmul(p, z_coarse)


def skip_fuse(z_unpooled: Operand, z_encoder: Operand, mlp: TokenMap):
    """MLP of the sum of decoder and encoder tokens, no residual."""
    a, b = ops.value_of(z_unpooled), ops.value_of(z_encoder)
    assert a.shape == b.shape, f"Skip connection shape mismatch {a.shape} vs {b.shape}"
    return mlp(ops.add(z_unpooled, z_encoder))


def compose_soft(p_list: Sequence[Operand], n0: Optional[int] = None):
    """P_(0→l) = P_1 ⋯ P_l.

    :param n0:
        Size of the identity returned for an empty chain
    """
    if not p_list:
        assert n0 is not None, "Empty assignment chain needs the level-0 size"
        return np.eye(n0, dtype=get_dtype())
    result = p_list[0]
    for p in p_list[1:]:
        result = ops.matmul(result, p)
    return result


def project_spatial(s0: SegmentationMap | np.ndarray, p_chain: Operand, z_tokens: Operand):
    """F_l = S₀ P_(0→l) Z'_l.

    :param s0:
        Level-0 partition, or its raster of labels, of the target grid

    :return:
        (cells)×d, row-major over the raster of `s0`
    """
    labels = s0.labels if isinstance(s0, SegmentationMap) else np.asarray(s0)
    per_segment = ops.matmul(p_chain, z_tokens)
    return ops.index(per_segment, labels.ravel())
