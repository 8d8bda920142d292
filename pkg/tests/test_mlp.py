"""Tests for the small tanh network, including a finite-difference oracle."""

from __future__ import annotations

import numpy as np
import pytest

from expressiveness.errors import DivergedError, TooShortError
from expressiveness.models import MlpParams, fit_mlp
from expressiveness.models.mlp import forward, init_network, loss_and_grads


def numeric_gradient(weights, biases, z, y, l2_alpha, h=1e-5):
    """Central finite differences through the full penalized loss."""

    def loss_only():
        return loss_and_grads(weights, biases, z, y, l2_alpha)[0]

    grads_w, grads_b = [], []
    for tensors, grads in ((weights, grads_w), (biases, grads_b)):
        for tensor in tensors:
            grad = np.zeros_like(tensor)
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + h
                up = loss_only()
                tensor[idx] = orig - h
                down = loss_only()
                tensor[idx] = orig
                grad[idx] = (up - down) / (2 * h)
            grads.append(grad)
    return grads_w, grads_b


@pytest.mark.parametrize("sizes,l2_alpha", [((3, 4, 1), 0.0), ((3, 5, 4, 1), 0.01)])
def test_analytic_gradients_match_finite_differences(sizes, l2_alpha):
    rng = np.random.default_rng(42)
    weights, biases = init_network(sizes, rng)
    z = rng.normal(size=(3, sizes[0]))
    y = rng.normal(size=3)

    _, grad_w, grad_b = loss_and_grads(weights, biases, z, y, l2_alpha)
    num_w, num_b = numeric_gradient(weights, biases, z, y, l2_alpha)
    for got, want in zip(grad_w + grad_b, num_w + num_b):
        scale = np.maximum(np.abs(want), 1e-8)
        assert np.max(np.abs(got - want) / scale) < 1e-5


def test_forward_shapes_and_linear_output():
    rng = np.random.default_rng(0)
    weights, biases = init_network((2, 3, 1), rng)
    z = rng.normal(size=(5, 2))
    acts = forward(z, weights, biases)
    assert [a.shape for a in acts] == [(5, 2), (5, 3), (5, 1)]
    # hidden activations are tanh-bounded, output is not squashed
    assert np.all(np.abs(acts[1]) < 1.0)
    assert np.allclose(acts[2], acts[1] @ weights[1] + biases[1])


def test_training_is_deterministic_per_seed():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 2))
    y = x[:, 0] - x[:, 1]
    params = MlpParams(hidden=(8,), max_epochs=30, seed=7)
    a = fit_mlp(x, y, params)
    b = fit_mlp(x, y, params)
    for wa, wb in zip(a.params["weights"], b.params["weights"]):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(a.params["biases"], b.params["biases"]):
        assert np.array_equal(ba, bb)

    c = fit_mlp(x, y, MlpParams(hidden=(8,), max_epochs=30, seed=8))
    assert not np.array_equal(a.params["weights"][0], c.params["weights"][0])


def test_learns_quadratic_better_than_any_line():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(200, 1))
    y = x[:, 0] ** 2
    model = fit_mlp(
        x, y, MlpParams(hidden=(64,), learning_rate=3e-3, max_epochs=500, seed=1)
    )
    grid = np.linspace(-1, 1, 101)[:, None]
    truth = grid[:, 0] ** 2
    rmse = np.sqrt(np.mean((model.predict(grid) - truth) ** 2))

    design = np.column_stack([x[:, 0], np.ones(len(x))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    line = np.column_stack([grid[:, 0], np.ones(101)]) @ coef
    linear_rmse = np.sqrt(np.mean((line - truth) ** 2))

    assert rmse < 0.1
    assert linear_rmse > 0.25
    assert rmse < linear_rmse / 2


def test_no_validation_split_runs_every_epoch():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    model = fit_mlp(x, y, MlpParams(hidden=(4,), max_epochs=25, val_fraction=0.0, seed=3))
    assert model.params["n_epochs_run"] == 25


def test_early_stopping_halts_on_noise():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(60, 3))
    y = rng.normal(size=60)
    model = fit_mlp(x, y, MlpParams(hidden=(8,), max_epochs=300, patience=3, seed=2))
    assert model.params["n_epochs_run"] < 300


def test_full_batch_row_permutation_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(24, 2))
    y = x[:, 0] + 0.5 * x[:, 1] ** 2
    params = MlpParams(
        hidden=(6,), max_epochs=40, batch_size=24, val_fraction=0.0, seed=11
    )
    base = fit_mlp(x, y, params)
    perm = rng.permutation(24)
    shuffled = fit_mlp(x[perm], y[perm], params)
    probe = rng.normal(size=(10, 2))
    assert np.allclose(base.predict(probe), shuffled.predict(probe), atol=1e-6)


def test_divergence_is_reported():
    x = np.arange(10.0)[:, None]
    y = np.full(10, 1e200)
    with np.errstate(over="ignore"), pytest.raises(DivergedError):
        fit_mlp(x, y, MlpParams(hidden=(4,), max_epochs=5, seed=0))


def test_param_validation():
    with pytest.raises(ValueError):
        MlpParams(hidden=(4, 4, 4))
    with pytest.raises(ValueError):
        MlpParams(hidden=())
    with pytest.raises(ValueError):
        MlpParams(hidden=(0,))
    with pytest.raises(ValueError):
        MlpParams(val_fraction=1.0)
    with pytest.raises(ValueError):
        MlpParams(learning_rate=0.0)
    with pytest.raises(ValueError):
        MlpParams(l2_alpha=-1.0)
    with pytest.raises(TooShortError):
        fit_mlp(np.ones((1, 2)), [1.0], MlpParams())
