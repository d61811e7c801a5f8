import math

import numpy as np
import pytest

from ravenbench.errors import NonFiniteError, ShapeError, StaleCache
from ravenbench.factor import SeededRng
from ravenbench.nn import (
    Layer,
    MlpParams,
    OptimizerState,
    adam_step,
    backprop,
    init_mlp,
    load_params,
    mlp_forward,
    save_params,
    softmax,
    softmax_cross_entropy,
    zeros_like,
)


def _reference_forward(params, x):
    a = x
    for i, layer in enumerate(params.layers):
        a = a @ layer.weight + layer.bias
        if i < len(params.layers) - 1:
            a = np.maximum(a, 0.0)
    return a


def test_init_shapes(rng):
    params = init_mlp([4, 8, 3], rng)
    assert params.sizes() == [4, 8, 3]
    assert np.all(np.abs(params.layers[0].weight) <= 0.5)
    assert set(params.named_arrays()) == {"0.weight", "0.bias", "1.weight", "1.bias"}


def test_layer_shape_mismatch():
    with pytest.raises(ShapeError) as e:
        MlpParams(layers=[Layer(np.zeros((2, 3)), np.zeros(3)), Layer(np.zeros((4, 1)), np.zeros(1))])
    assert e.value.layer == 1
    with pytest.raises(ShapeError):
        mlp_forward(MlpParams(layers=[Layer(np.zeros((2, 3)), np.zeros(3))]), np.zeros((5, 4)))


def test_zero_weights_give_zero_output(rng):
    params = zeros_like(init_mlp([5, 7, 2], rng))
    out, _ = mlp_forward(params, rng.generator.normal(size=(3, 5)))
    assert np.array_equal(out, np.zeros((3, 2)))


def test_forward_matches_reference(rng):
    params = init_mlp([6, 10, 10, 4], rng)
    x = rng.generator.normal(size=(2, 7, 6))
    out, _ = mlp_forward(params, x)
    assert out.shape == (2, 7, 4)
    assert np.allclose(out.reshape(-1, 4), _reference_forward(params, x.reshape(-1, 6)))


def test_dropout_off_outside_train_mode(rng):
    params = init_mlp([3, 6, 2], rng)
    x = rng.generator.normal(size=(4, 3))
    plain, _ = mlp_forward(params, x)
    evaluated, cache = mlp_forward(params, x, dropout_rate=0.5, rng=SeededRng(0), train_mode=False)
    assert np.array_equal(plain, evaluated)
    assert cache.mask is None
    zero_rate, _ = mlp_forward(params, x, dropout_rate=0.0, rng=SeededRng(0), train_mode=True)
    assert np.array_equal(plain, zero_rate)


def test_linear_layer_gradient_is_outer_product():
    params = MlpParams(layers=[Layer(weight=np.array([[1.0, -2.0], [0.5, 3.0]]), bias=np.array([0.1, 0.2]))])
    x = np.array([[2.0, -1.0]])
    upstream = np.array([[0.3, -0.7]])
    _, cache = mlp_forward(params, x)
    grads, dx = backprop(params, cache, upstream)
    assert np.allclose(grads.layers[0].weight, np.outer(x[0], upstream[0]))
    assert np.allclose(grads.layers[0].bias, upstream[0])
    assert np.allclose(dx, upstream @ params.layers[0].weight.T)


def test_gradients_match_finite_differences(rng):
    params = init_mlp([3, 5, 4, 2], rng)
    x = rng.generator.normal(size=(6, 3))
    upstream = rng.generator.normal(size=(6, 2))

    def objective():
        out, _ = mlp_forward(params, x, dropout_rate=0.3, rng=SeededRng(9), train_mode=True)
        return float(np.sum(out * upstream))

    _, cache = mlp_forward(params, x, dropout_rate=0.3, rng=SeededRng(9), train_mode=True)
    grads, _ = backprop(params, cache, upstream)
    eps = 1e-6
    for layer, grad in zip(params.layers, grads.layers):
        for array, g in ((layer.weight, grad.weight), (layer.bias, grad.bias)):
            for index in list(np.ndindex(array.shape))[:6]:
                saved = array[index]
                array[index] = saved + eps
                up = objective()
                array[index] = saved - eps
                down = objective()
                array[index] = saved
                assert g[index] == pytest.approx((up - down) / (2 * eps), rel=1e-4, abs=1e-7)


def test_dropped_units_get_no_gradient(rng):
    params = init_mlp([4, 16, 1], rng)
    x = rng.generator.normal(size=(1, 4))
    _, cache = mlp_forward(params, x, dropout_rate=0.5, rng=SeededRng(3), train_mode=True)
    assert set(np.unique(cache.mask)) <= {0.0, 2.0}
    grads, _ = backprop(params, cache, np.ones((1, 1)))
    dropped = cache.mask[0] == 0.0
    assert dropped.any()
    assert np.all(grads.layers[1].weight[dropped] == 0.0)


def test_stale_cache(rng):
    params = init_mlp([2, 3, 1], rng)
    _, cache = mlp_forward(params, np.ones((1, 2)))
    grads, _ = backprop(params, cache, np.ones((1, 1)))
    adam_step(OptimizerState(), params, grads.named_arrays())
    with pytest.raises(StaleCache):
        backprop(params, cache, np.ones((1, 1)))
    other = init_mlp([2, 3, 1], rng)
    _, cache = mlp_forward(other, np.ones((1, 2)))
    with pytest.raises(StaleCache):
        backprop(params, cache, np.ones((1, 1)))


def test_adam_zero_gradient(rng):
    params = init_mlp([2, 3, 1], rng)
    before = {k: v.copy() for k, v in params.named_arrays().items()}
    state = OptimizerState()
    adam_step(state, params, {k: np.zeros_like(v) for k, v in before.items()})
    assert state.step == 1
    assert all(np.array_equal(before[k], v) for k, v in params.named_arrays().items())


def test_adam_first_step():
    params = MlpParams(layers=[Layer(weight=np.array([[1.0]]), bias=np.array([0.0]))])
    state = OptimizerState(lr=0.1)
    adam_step(state, params, {"0.weight": np.array([[0.5]]), "0.bias": np.array([-2.0])})
    assert params.layers[0].weight[0, 0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8))
    assert params.layers[0].bias[0] == pytest.approx(0.1 * 2.0 / (2.0 + 1e-8))
    assert params.version == 1


def test_adam_rejects_bad_gradients(rng):
    params = init_mlp([2, 1], rng)
    with pytest.raises(NonFiniteError) as e:
        adam_step(OptimizerState(), params, {"0.weight": np.full((2, 1), np.nan), "0.bias": np.zeros(1)})
    assert e.value.where == "0.weight"
    with pytest.raises(ShapeError):
        adam_step(OptimizerState(), params, {"0.weight": np.zeros((2, 1))})


def test_softmax_cross_entropy():
    loss, dlogits = softmax_cross_entropy(np.zeros((4, 6)), np.array([0, 1, 2, 5]))
    assert loss == pytest.approx(math.log(6))
    assert np.allclose(dlogits.sum(axis=1), 0.0)
    assert np.allclose(softmax(np.array([[1000.0, 1000.0]])), 0.5)


def _train_toy(steps: int):
    rng = SeededRng(4)
    centers = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
    labels = rng.draws(3, size=90)
    x = centers[labels] + 0.3 * rng.generator.normal(size=(90, 2))
    params = init_mlp([2, 16, 3], SeededRng(5))
    state = OptimizerState(lr=0.01)
    losses = []
    for _ in range(steps):
        logits, cache = mlp_forward(params, x)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        grads, _ = backprop(params, cache, dlogits)
        adam_step(state, params, grads.named_arrays())
        losses.append(loss)
    return losses, params


def test_training_reduces_loss():
    losses, _ = _train_toy(200)
    assert losses[-1] <= 0.5 * losses[0]


def test_training_is_deterministic():
    a_losses, a = _train_toy(50)
    b_losses, b = _train_toy(50)
    assert a_losses == b_losses
    assert all(np.array_equal(v, b.named_arrays()[k]) for k, v in a.named_arrays().items())


def test_save_and_load(rng, tmp_path):
    params = init_mlp([3, 4, 2], rng)
    path = str(tmp_path / "params" / "mlp")
    save_params(params.named_arrays(), path)
    loaded = MlpParams.from_named(load_params(path))
    assert loaded.sizes() == params.sizes()
    assert all(np.array_equal(v, loaded.named_arrays()[k]) for k, v in params.named_arrays().items())
