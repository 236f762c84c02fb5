"""Adam with bias correction.

Updates are pure: a new :py:class:`TrainState` is returned and the input state
is left untouched. Arithmetic runs in the dtype of each parameter.
"""
import logging
from typing import Optional

import numpy as np

from segdepth.core.node import NumericFailure
from segdepth.model.params import ModelParams
from segdepth.training.config import TrainConfig
from segdepth.training.state import TrainState

logger = logging.getLogger(__name__)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    """l2 norm over all gradient entries, summed in name order."""
    total = 0.0
    for name in sorted(grads):
        total += float(np.sum(np.square(grads[name], dtype=np.float64)))
    return float(np.sqrt(total))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: Optional[float]) -> tuple[dict[str, np.ndarray], float]:
    """Scale gradients down so their global norm is at most `max_norm`.

    :return:
        Clipped gradients and the norm before clipping
    """
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {name: (g * scale).astype(g.dtype) for name, g in grads.items()}, norm


def check_finite(grads: dict[str, np.ndarray]):
    """:raise NumericFailure: naming every parameter with a non-finite gradient"""
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericFailure(f"Non-finite gradients for {len(bad)} parameters, first {bad[0]}")


def adam_step(state: TrainState, grads: dict[str, np.ndarray], config: TrainConfig) -> TrainState:
    """One Adam update.

    `m ← b1·m + (1 - b1)·g`, `v ← b2·v + (1 - b2)·g²`,
    `p ← p - lr·m̂ / (√v̂ + eps)` with `m̂ = m / (1 - b1^t)`, `v̂ = v / (1 - b2^t)`.

    :raise NumericFailure:
        If any gradient is not finite. The state is not changed.
    """
    check_finite(grads)
    missing = set(state.params) - set(grads)
    assert not missing, f"No gradients for {sorted(missing)[:3]}"

    b1, b2 = config.betas
    t = state.step + 1
    correction1 = 1 - b1 ** t
    correction2 = 1 - b2 ** t

    params, first, second = {}, {}, {}
    for name in state.params:
        p = state.params[name]
        g = grads[name].astype(p.dtype)
        m = b1 * state.first_moments[name] + (1 - b1) * g
        v = b2 * state.second_moments[name] + (1 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        params[name] = (p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(p.dtype)
        first[name] = m.astype(p.dtype)
        second[name] = v.astype(p.dtype)

    return TrainState(step=t, params=ModelParams(params), first_moments=first, second_moments=second)
