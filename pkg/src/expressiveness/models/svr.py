"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved in the compact beta form (beta_i plays the role of
alpha_i - alpha_i* from the textbook formulation):

    minimize  W(beta) = 1/2 beta' K beta + epsilon ||beta||_1 - y' beta
    subject to  sum(beta) = 0,  -C <= beta_i <= C

by repeatedly optimizing the maximal violating pair exactly. Each pair
subproblem is a one-dimensional piecewise quadratic whose candidate
minimizers (segment stationary points, kink points, box ends) are all
evaluated, so every update is an exact line minimization and W never
increases. Optimality is declared when every point admits a common value
of the equality-constraint multiplier within tol.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import NotConvergedWarning, TooShortError
from .base import TrainedModel, as_matrix, fit_standardizer


@dataclass(frozen=True)
class SvrParams:
    """C bounds the dual variables, gamma is the RBF coefficient."""

    C: float
    gamma: float
    epsilon: float = 0.1
    tol: float = 1e-4
    max_iter: int = 100000

    def __post_init__(self):
        if self.C <= 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _multiplier_bounds(beta, g, c, eps):
    """Per-point admissible range [lo_i, hi_i] of the equality multiplier.

    KKT holds iff the ranges share a common point: max(lo) <= min(hi).
    """
    lo = np.where(beta >= 0, g + eps, -np.inf)
    hi = np.where(beta <= 0, g - eps, np.inf)
    at_zero = beta == 0
    lo = np.where(at_zero, g - eps, lo)
    hi = np.where(at_zero, g + eps, hi)
    lo = np.where(beta == -c, -np.inf, lo)
    hi = np.where(beta == c, np.inf, hi)
    interior_pos = (beta > 0) & (beta < c)
    interior_neg = (beta < 0) & (beta > -c)
    hi = np.where(interior_pos, g + eps, hi)
    lo = np.where(interior_neg, g - eps, lo)
    return lo, hi


def _pair_step(bi, bj, gi, gj, kappa, c, eps):
    """Exact minimizer of the pair subproblem.

    delta moves beta_i up and beta_j down by the same amount. The change
    in the dual objective is

        1/2 kappa delta^2 + (gi - gj) delta
            + eps (|bi + delta| - |bi| + |bj - delta| - |bj|),

    piecewise quadratic with kinks at delta = -bi and delta = bj.
    """
    dlo = max(-c - bi, bj - c)
    dhi = min(c - bi, bj + c)

    def change(delta):
        return (
            0.5 * kappa * delta * delta
            + (gi - gj) * delta
            + eps * (abs(bi + delta) - abs(bi) + abs(bj - delta) - abs(bj))
        )

    candidates = [dlo, dhi]
    for kink in (-bi, bj):
        if dlo < kink < dhi:
            candidates.append(kink)
    if kappa > 0:
        edges = sorted({dlo, dhi, *[k for k in (-bi, bj) if dlo < k < dhi]})
        for left, right in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (left + right)
            slope_sign = eps * (np.sign(bi + mid) - np.sign(bj - mid))
            stationary = -((gi - gj) + slope_sign) / kappa
            if left <= stationary <= right:
                candidates.append(stationary)
    best = min(candidates, key=change)
    return best, change(best)


def _snap(value, c):
    for target in (-c, 0.0, c):
        if abs(value - target) < 1e-12:
            return target
    return value


def fit_svr(
    X, y, params: SvrParams, feature_names: tuple[str, ...] | None = None
) -> TrainedModel:
    """Solve the dual to tolerance and package the support-vector expansion.

    The bias comes from averaging the multiplier over points strictly
    inside the box (where it is pinned exactly); with no interior point it
    is the midpoint of the tightest admissible range.
    """
    x = as_matrix(X)
    yv = np.asarray(y, dtype=float).ravel()
    n, _ = x.shape
    if n < 2:
        raise TooShortError(f"need at least 2 samples, got {n}")
    if yv.shape[0] != n:
        raise ValueError("X and y lengths differ")
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(x.shape[1]))

    means, sds = fit_standardizer(x)
    z = (x - means) / sds
    k = rbf_kernel(z, z, params.gamma)
    c, eps = params.C, params.epsilon

    beta = np.zeros(n)
    g = -yv.copy()  # gradient of the smooth part: K beta - y
    converged = False
    for _ in range(params.max_iter):
        lo, hi = _multiplier_bounds(beta, g, c, eps)
        i = int(np.argmax(lo))
        j = int(np.argmin(hi))
        if lo[i] - hi[j] <= params.tol:
            converged = True
            break
        kappa = k[i, i] + k[j, j] - 2.0 * k[i, j]
        delta, gain = _pair_step(beta[i], beta[j], g[i], g[j], kappa, c, eps)
        if delta == 0.0 or gain >= 0.0:
            break  # numerically stalled; final KKT residual is reported
        beta[i] = _snap(beta[i] + delta, c)
        beta[j] = _snap(beta[j] - delta, c)
        g += delta * (k[:, i] - k[:, j])
    if not converged:
        warnings.warn(
            "pairwise dual optimization stopped before reaching tolerance",
            NotConvergedWarning,
            stacklevel=2,
        )

    lo, hi = _multiplier_bounds(beta, g, c, eps)
    interior = (beta != 0) & (np.abs(beta) != c)
    if np.any(interior):
        nu = float(np.mean(g[interior] + eps * np.sign(beta[interior])))
    else:
        nu = 0.5 * (float(np.max(lo)) + float(np.min(hi)))
    bias = -nu

    objective = float(
        0.5 * beta @ k @ beta + eps * np.abs(beta).sum() - yv @ beta
    )
    support = beta != 0
    return TrainedModel(
        kind="svr",
        feature_names=feature_names,
        feature_means=means,
        feature_sds=sds,
        params={
            "support_vectors": z[support],
            "dual_coef": beta[support],
            "bias": bias,
            "C": c,
            "gamma": params.gamma,
            "epsilon": eps,
            "dual_objective": objective,
            "kkt_residual": max(0.0, float(np.max(lo) - np.min(hi))),
            "n_support": int(support.sum()),
        },
    )
