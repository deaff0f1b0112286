import math

import numpy as np
import pytest

from premir import rng, tensor
from premir.errors import InvariantError, ValidationError

from oracles import adam_scalar_trace


def test_activation_values():
    assert tensor.hard_sigmoid(0.0) == 0.5
    assert tensor.hard_sigmoid(3.0) == 1.0
    assert tensor.hard_sigmoid(-3.0) == 0.0
    assert tensor.sigmoid(np.array([0.0]))[0] == 0.5
    assert tensor.tanh(0.0) == 0.0


def test_sigmoid_extremes_do_not_overflow():
    out = tensor.sigmoid(np.array([-1000.0, 1000.0]))
    assert out[0] == 0.0 and out[1] == 1.0


@pytest.mark.parametrize("fn", [tensor.sigmoid, tensor.tanh, tensor.hard_sigmoid])
def test_activation_rejects_nonfinite(fn):
    with pytest.raises(InvariantError):
        fn(np.array([0.0, np.nan]))


@pytest.mark.parametrize("fn,grad", [
    (tensor.sigmoid, tensor.sigmoid_grad),
    (tensor.tanh, tensor.tanh_grad),
    (tensor.hard_sigmoid, tensor.hard_sigmoid_grad),
])
def test_activation_derivatives(fn, grad, gen):
    x = gen.uniform(-5, 5, 100)
    if fn is tensor.hard_sigmoid:
        x = x[np.abs(np.abs(x) - 2.5) > 1e-3]
    h = 1e-5
    numeric = (fn(x + h) - fn(x - h)) / (2 * h)
    assert np.max(tensor.relative_error(grad(x), numeric)) < 1e-6


def test_hard_sigmoid_derivative_pieces():
    assert np.allclose(tensor.hard_sigmoid_grad(np.array([-3.0, -2.5, 0.0, 2.4, 2.5, 3.0])),
                       [0, 0, 0.2, 0.2, 0, 0])


def test_mse_zero():
    y = np.array([[0.3, 0.7]])
    loss, g = tensor.mse_loss(y, y)
    assert loss == 0.0 and not g.any()


def test_mse_value():
    loss, _ = tensor.mse_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    assert loss == 2.0


def test_mse_gradient(gen):
    pred = gen.uniform(0, 1, (4, 2))
    target = gen.uniform(0, 1, (4, 2))
    _, g = tensor.mse_loss(pred, target)
    f = lambda: tensor.mse_loss(pred, target)[0]
    err = tensor.grad_check(f, {"p": pred}, {"p": g})
    assert err < 1e-6


def test_mse_shape_mismatch():
    with pytest.raises(ValidationError):
        tensor.mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


@pytest.mark.parametrize("g", [1e-3, -0.5, 7.0, -1e4])
def test_adam_first_step_magnitude(g):
    params = {"w": np.array([1.0])}
    state = tensor.AdamState()
    tensor.adam_step(params, {"w": np.array([g])}, state)
    delta = params["w"][0] - 1.0
    assert 0.000999 <= abs(delta) <= 0.001
    assert math.copysign(1, delta) == -math.copysign(1, g)
    assert state.t == 1


def test_adam_zero_gradient():
    params = {"w": np.array([0.25, -1.0])}
    state = tensor.AdamState()
    tensor.adam_step(params, {"w": np.zeros(2)}, state)
    assert np.array_equal(params["w"], [0.25, -1.0])
    assert state.t == 1


def test_adam_matches_scalar_trace():
    grads = [0.3, 0.3, -1.2, 0.05]
    params = {"w": np.array([0.0])}
    state = tensor.AdamState()
    for g, (w, m, v) in zip(grads, adam_scalar_trace(grads)):
        tensor.adam_step(params, {"w": np.array([g])}, state)
        assert params["w"][0] == pytest.approx(w, rel=1e-12, abs=1e-15)
        assert state.m["w"][0] == pytest.approx(m, rel=1e-12)
        assert state.v["w"][0] == pytest.approx(v, rel=1e-12)


def test_adam_shape_mismatch():
    with pytest.raises(ValidationError):
        tensor.adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, tensor.AdamState())


def test_adam_zero_step_size_freezes():
    params = {"w": np.array([0.5])}
    state = tensor.AdamState(alpha=0.0)
    for _ in range(5):
        tensor.adam_step(params, {"w": np.array([1.0])}, state)
    assert params["w"][0] == 0.5


def test_dropout_rate_zero():
    assert np.array_equal(tensor.dropout_mask((3, 4), 0.0, rng.stream(0, 1)), np.ones((3, 4)))


def test_dropout_statistics():
    mask = tensor.dropout_mask((100_000,), 0.2, rng.stream(0, rng.DROPOUT))
    assert abs(mask.mean() - 1.0) < 0.01
    assert abs(np.mean(mask == 0) - 0.2) < 0.01
    assert set(np.unique(mask)) == {0.0, 1.25}


def test_dropout_inference_identity(gen):
    x = gen.normal(size=(5, 3))
    assert np.array_equal(x * tensor.dropout_mask(x.shape, 0.2, gen, training=False), x)


def test_dropout_rejects_rate_one():
    with pytest.raises(ValidationError):
        tensor.dropout_mask((2,), 1.0, None)


def test_grad_check_quadratic():
    w = np.array([3.0])
    err = tensor.grad_check(lambda: float(w[0] ** 2), {"w": w}, {"w": np.array([6.0])})
    assert err < 1e-8


def test_grad_check_catches_corruption():
    w = np.array([3.0, -1.0])
    f = lambda: float(np.sum(w ** 2))
    good = {"w": 2 * w.copy()}
    bad = {"w": 1.1 * 2 * w.copy()}
    assert tensor.grad_check(f, {"w": w}, good) < 1e-8
    assert tensor.grad_check(f, {"w": w}, bad) > 1e-4


def test_grad_check_restores_params(gen):
    w = gen.normal(size=5)
    before = w.copy()
    tensor.grad_check(lambda: float(np.sum(np.sin(w))), {"w": w}, {"w": np.cos(w)})
    assert np.array_equal(w, before)
