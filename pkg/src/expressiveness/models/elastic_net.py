"""Elastic Net linear regression by cyclic coordinate descent.

Minimizes

    (1/2n) * ||y - b0 - X beta||^2
        + alpha * (lam * ||beta||_1 + (1 - lam)/2 * ||beta||_2^2)

over standardized features, so lam = 1 is the lasso and lam = 0 ridge.
Each coordinate update is the closed-form soft-threshold step; sweeps run
on precomputed Gram products, which makes a fit cheap enough for the full
grid search of the evaluation harness. The objective is asserted
non-increasing after every sweep.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NotConvergedWarning, TooShortError
from .base import TrainedModel, as_matrix, fit_standardizer


@dataclass(frozen=True)
class ElasticNetParams:
    """alpha is the penalty weight, lam the L1/L2 mixing in [0, 1]."""

    alpha: float
    lam: float
    tol: float = 1e-6
    max_iter: int = 10000

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


def _soft_threshold(z: float, threshold: float) -> float:
    if z > threshold:
        return z - threshold
    if z < -threshold:
        return z + threshold
    return 0.0


def fit_elastic_net(
    X,
    y,
    params: ElasticNetParams,
    feature_names: tuple[str, ...] | None = None,
    init_coef=None,
) -> TrainedModel:
    """Fit by cyclic coordinate descent on training-standardized features.

    Zero-variance columns are excluded from updates and get coefficient
    exactly 0. init_coef (standardized space) warm-starts the sweep, which
    speeds up repeated fits along a hyperparameter grid without changing
    the optimum.
    """
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
    active = np.ptp(x, axis=0) > 0
    z = (x - means) / sds
    za = z[:, active]
    pa = za.shape[1]

    intercept = float(yv.mean())
    yc = yv - intercept
    syy = float(yc @ yc) / n

    beta = np.zeros(pa)
    if init_coef is not None:
        init = np.asarray(init_coef, dtype=float)
        if init.shape != (p,):
            raise ValueError(f"init_coef must have shape ({p},)")
        beta = init[active].copy()

    coef = np.zeros(p)
    n_sweeps = 0
    if pa > 0:
        gram = za.T @ za / n
        diag = np.diag(gram).copy()
        corr = za.T @ yc / n
        l1 = params.alpha * params.lam
        l2 = params.alpha * (1.0 - params.lam)
        denom = diag + l2
        gb = gram @ beta

        def objective(b, gb_vec):
            fit_term = 0.5 * (syy - 2.0 * float(corr @ b) + float(b @ gb_vec))
            penalty = params.alpha * (
                params.lam * float(np.abs(b).sum())
                + 0.5 * (1.0 - params.lam) * float(b @ b)
            )
            return fit_term + penalty

        prev_obj = objective(beta, gb)
        converged = False
        for n_sweeps in range(1, params.max_iter + 1):
            max_step = 0.0
            for j in range(pa):
                rho = float(corr[j] - gb[j] + diag[j] * beta[j])
                new = _soft_threshold(rho, l1) / denom[j]
                step = new - beta[j]
                if step != 0.0:
                    gb += gram[:, j] * step
                    beta[j] = new
                    max_step = max(max_step, abs(step))
            obj = objective(beta, gb)
            assert obj <= prev_obj + 1e-10 * max(1.0, abs(prev_obj)), (
                "coordinate-descent objective increased"
            )
            prev_obj = obj
            if max_step < params.tol:
                converged = True
                break
        if not converged:
            warnings.warn(
                f"coordinate descent did not converge in {params.max_iter} sweeps",
                NotConvergedWarning,
                stacklevel=2,
            )
        coef[active] = beta

    return TrainedModel(
        kind="elastic_net",
        feature_names=feature_names,
        feature_means=means,
        feature_sds=sds,
        params={
            "intercept": intercept,
            "coef": coef,
            "alpha": params.alpha,
            "lambda": params.lam,
            "n_sweeps": n_sweeps,
        },
    )
