"""Adam updates and gradient clipping."""
import math

import numpy as np
import pytest

from segdepth.core.node import NumericFailure
from segdepth.model.params import ModelParams
from segdepth.training.config import TrainConfig
from segdepth.training.optimiser import adam_step, clip_gradients, global_norm
from segdepth.training.state import TrainState


def _state(value: float) -> TrainState:
    return TrainState.fresh(ModelParams({"p": np.array([value], dtype=np.float64)}))


def test_first_step_moves_by_the_learning_rate():
    config = TrainConfig(lr=1e-3)
    state = adam_step(_state(1.0), {"p": np.array([4.0])}, config)
    assert state.step == 1
    assert state.params["p"][0] == pytest.approx(1.0 - 1e-3, abs=1e-10)


def test_input_state_is_untouched():
    before = _state(1.0)
    adam_step(before, {"p": np.array([4.0])}, TrainConfig(lr=1e-3))
    assert before.step == 0
    assert before.params["p"][0] == 1.0
    assert before.first_moments["p"][0] == 0.0


def test_ten_steps_on_a_parabola():
    """Minimise p² from p = 1 and follow the update by hand."""
    config = TrainConfig(lr=0.1)
    b1, b2 = config.betas
    state = _state(1.0)
    p, m, v = 1.0, 0.0, 0.0
    for t in range(1, 11):
        g = 2 * p
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - config.lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + config.eps)
        state = adam_step(state, {"p": 2 * state.params["p"]}, config)
        assert state.params["p"][0] == pytest.approx(p, rel=1e-12)
    assert state.step == 10
    assert abs(p) < 1.0


def test_zero_learning_rate_keeps_params():
    state = adam_step(_state(2.5), {"p": np.array([1.0])}, TrainConfig(lr=0.0))
    assert state.params["p"][0] == 2.5
    assert state.first_moments["p"][0] != 0


def test_dtype_is_kept():
    params = ModelParams({"w": np.ones((2, 2), dtype=np.float32)})
    state = adam_step(TrainState.fresh(params), {"w": np.ones((2, 2))}, TrainConfig())
    assert state.params["w"].dtype == np.float32
    assert state.first_moments["w"].dtype == np.float32


def test_non_finite_gradient():
    with pytest.raises(NumericFailure):
        adam_step(_state(1.0), {"p": np.array([np.nan])}, TrainConfig())


def test_global_norm_and_clip():
    grads = {"a": np.array([3.0]), "b": np.array([[4.0]])}
    assert global_norm(grads) == 5.0

    clipped, norm = clip_gradients(grads, 1.0)
    assert norm == 5.0
    assert global_norm(clipped) == pytest.approx(1.0)
    assert clipped["a"][0] == pytest.approx(0.6)

    same, _ = clip_gradients(grads, 10.0)
    assert same is grads
    same, _ = clip_gradients(grads, None)
    assert same is grads
