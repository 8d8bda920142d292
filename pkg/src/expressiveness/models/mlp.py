"""Small feed-forward regressor trained with Adam.

Hidden layers use tanh (smooth, so analytic gradients can be checked
against central finite differences to tight tolerance); the output is
linear. The loss is

    (1/2m) sum (y_hat - y)^2 + (l2_alpha / 2) sum ||W_l||^2

with the penalty on weight matrices only, never biases. Training is
mini-batch gradient descent with adaptive moments, a seeded symmetric
uniform init scaled by fan-in, and optional early stopping on a held-out
validation split. Everything downstream of the seed is deterministic.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from ..errors import DivergedError, TooShortError
from .base import TrainedModel, as_matrix, fit_standardizer

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_MIN_IMPROVEMENT = 1e-10


@dataclass(frozen=True)
class MlpParams:
    """Architecture and optimizer settings.

    val_fraction = 0 disables the validation split and early stopping, in
    which case training always runs max_epochs.
    """

    hidden: tuple[int, ...] = (64,)
    l2_alpha: float = 0.0
    learning_rate: float = 1e-3
    max_epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    patience: int = 20
    val_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 1 <= len(self.hidden) <= 2:
            raise ValueError("hidden must have one or two layers")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.l2_alpha < 0:
            raise ValueError("l2_alpha must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs, batch_size, patience must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def init_network(sizes, rng: np.random.Generator):
    """Symmetric uniform init, half-width 1/sqrt(fan_in); zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(z, weights, biases):
    """Activations per layer; hidden layers tanh, output linear."""
    acts = [z]
    h = z
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ w + b)
        acts.append(h)
    acts.append(acts[-1] @ weights[-1] + biases[-1])
    return acts


def loss_and_grads(weights, biases, z, y, l2_alpha):
    """Penalized half-MSE and its gradients for every parameter tensor."""
    m = z.shape[0]
    acts = forward(z, weights, biases)
    pred = acts[-1].ravel()
    resid = pred - y
    loss = float(resid @ resid) / (2.0 * m)
    loss += 0.5 * l2_alpha * sum(float(np.sum(w * w)) for w in weights)

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = (resid / m)[:, None]
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta + l2_alpha * weights[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (1.0 - acts[layer] ** 2)
    return loss, grad_w, grad_b


def _mse_half(weights, biases, z, y) -> float:
    pred = forward(z, weights, biases)[-1].ravel()
    resid = pred - y
    return float(resid @ resid) / (2.0 * len(y))


def fit_mlp(
    X, y, params: MlpParams, feature_names: tuple[str, ...] | None = None
) -> TrainedModel:
    """Train on standardized features; deterministic given params.seed."""
    x = as_matrix(X)
    yv = np.asarray(y, dtype=float).ravel()
    n, p = x.shape
    if n < 2:
        raise TooShortError(f"need at least 2 samples, got {n}")
    if yv.shape[0] != n:
        raise ValueError("X and y lengths differ")
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(p))

    means, sds = fit_standardizer(x)
    z = (x - means) / sds
    rng = np.random.default_rng(np.random.SeedSequence([int(params.seed)]))
    sizes = (p, *params.hidden, 1)
    weights, biases = init_network(sizes, rng)

    if params.val_fraction > 0:
        n_val = min(n - 1, max(1, int(round(params.val_fraction * n))))
        perm = rng.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        val_idx = np.empty(0, dtype=int)
        train_idx = np.arange(n)
    z_train, y_train = z[train_idx], yv[train_idx]
    z_val, y_val = z[val_idx], yv[val_idx]
    n_train = len(train_idx)

    adam_m = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
    adam_v = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
    step = 0

    best_val = np.inf
    best_state = None
    stall = 0
    epochs_run = 0
    for epoch in range(params.max_epochs):
        epochs_run = epoch + 1
        order = rng.permutation(n_train)
        for start in range(0, n_train, params.batch_size):
            batch = order[start:start + params.batch_size]
            loss, grad_w, grad_b = loss_and_grads(
                weights, biases, z_train[batch], y_train[batch], params.l2_alpha
            )
            if not np.isfinite(loss):
                raise DivergedError(f"training loss became {loss}")
            step += 1
            grads = grad_w + grad_b
            tensors = weights + biases
            for idx, (tensor, grad) in enumerate(zip(tensors, grads)):
                adam_m[idx] = _ADAM_BETA1 * adam_m[idx] + (1 - _ADAM_BETA1) * grad
                adam_v[idx] = _ADAM_BETA2 * adam_v[idx] + (1 - _ADAM_BETA2) * grad**2
                m_hat = adam_m[idx] / (1 - _ADAM_BETA1**step)
                v_hat = adam_v[idx] / (1 - _ADAM_BETA2**step)
                tensor -= params.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        if len(val_idx) > 0:
            val_loss = _mse_half(weights, biases, z_val, y_val)
            if not np.isfinite(val_loss):
                raise DivergedError("validation loss became non-finite")
            if val_loss < best_val - _MIN_IMPROVEMENT:
                best_val = val_loss
                best_state = (
                    [w.copy() for w in weights], [b.copy() for b in biases]
                )
                stall = 0
            else:
                stall += 1
                if stall >= params.patience:
                    break
    if best_state is not None:
        weights, biases = best_state

    return TrainedModel(
        kind="mlp",
        feature_names=feature_names,
        feature_means=means,
        feature_sds=sds,
        params={
            "weights": weights,
            "biases": biases,
            "hidden": list(params.hidden),
            "l2_alpha": params.l2_alpha,
            "n_epochs_run": epochs_run,
        },
    )
