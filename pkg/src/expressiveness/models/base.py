"""Shared train/predict contract for the three regressors.

Every fit captures per-feature standardization statistics from its own
training data and stores them in the returned TrainedModel, so prediction
applies exactly the training-fold transform and no fold leakage is
possible. Kind-specific parameters live in a plain dict that serializes
to JSON for audit and coefficient analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import DimensionMismatchError

KINDS = ("elastic_net", "svr", "mlp")


def fit_standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population SD; constant columns get SD 1."""
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    sds = np.where(np.ptp(X, axis=0) == 0, 1.0, sds)
    return means, sds


def as_matrix(X, n_features: int | None = None) -> np.ndarray:
    x = np.asarray(X, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got ndim={x.ndim}")
    if n_features is not None and x.shape[1] != n_features:
        raise DimensionMismatchError(
            f"model was trained on {n_features} features, got {x.shape[1]}"
        )
    return x


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted regressor: kind tag, standardization stats, parameters.

    params holds kind-specific payloads (numpy arrays allowed):
      elastic_net: intercept, coef (in standardized feature space), plus
        the hyperparameters used;
      svr: support_vectors (standardized rows), dual_coef, bias, and the
        kernel hyperparameters;
      mlp: weights and biases per layer.
    """

    kind: str
    feature_names: tuple[str, ...]
    feature_means: np.ndarray
    feature_sds: np.ndarray
    params: dict[str, Any] = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        p = len(self.feature_names)
        for name in ("feature_means", "feature_sds"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (p,):
                raise ValueError(f"{name} must have shape ({p},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.feature_sds <= 0):
            raise ValueError("feature SDs must be positive")
        if self.kind == "elastic_net":
            coef = np.asarray(self.params["coef"], dtype=float)
            if coef.shape != (p,):
                raise ValueError("coefficient count must equal feature count")
        if self.kind == "svr":
            dual = np.asarray(self.params["dual_coef"], dtype=float)
            c = float(self.params["C"])
            if np.any(np.abs(dual) > c + 1e-12):
                raise ValueError("dual coefficients must lie in [-C, C]")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def standardize(self, X) -> np.ndarray:
        x = as_matrix(X, self.n_features)
        return (x - self.feature_means) / self.feature_sds

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def predict(model: TrainedModel, X) -> np.ndarray:
    """Apply the stored standardization, then the fitted function."""
    z = model.standardize(X)
    p = model.params
    if model.kind == "elastic_net":
        return p["intercept"] + z @ np.asarray(p["coef"], dtype=float)
    if model.kind == "svr":
        sv = np.asarray(p["support_vectors"], dtype=float)
        dual = np.asarray(p["dual_coef"], dtype=float)
        if sv.size == 0:
            return np.full(z.shape[0], float(p["bias"]))
        sq = (
            np.sum(z**2, axis=1)[:, None]
            + np.sum(sv**2, axis=1)[None, :]
            - 2.0 * z @ sv.T
        )
        k = np.exp(-float(p["gamma"]) * np.maximum(sq, 0.0))
        return k @ dual + float(p["bias"])
    # mlp
    h = z
    weights = [np.asarray(w, dtype=float) for w in p["weights"]]
    biases = [np.asarray(b, dtype=float) for b in p["biases"]]
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ w + b)
    return (h @ weights[-1] + biases[-1]).ravel()


def _encode(value):
    if isinstance(value, np.ndarray):
        return {"__array__": value.tolist()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    return value


def _decode(value):
    if isinstance(value, dict):
        if set(value) == {"__array__"}:
            return np.asarray(value["__array__"], dtype=float)
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def model_to_json(model: TrainedModel) -> str:
    payload = {
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "feature_means": model.feature_means.tolist(),
        "feature_sds": model.feature_sds.tolist(),
        "params": _encode(model.params),
    }
    return json.dumps(payload, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    payload = json.loads(text)
    return TrainedModel(
        kind=payload["kind"],
        feature_names=tuple(payload["feature_names"]),
        feature_means=np.asarray(payload["feature_means"], dtype=float),
        feature_sds=np.asarray(payload["feature_sds"], dtype=float),
        params=_decode(payload["params"]),
    )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return model_from_json(fh.read())
