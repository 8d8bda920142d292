"""Tests for the pairwise-update SVR solver against a QP oracle."""

from __future__ import annotations

import numpy as np
import pytest
from cvxopt import matrix, solvers

from expressiveness.errors import TooShortError
from expressiveness.models import SvrParams, fit_svr
from expressiveness.models.base import fit_standardizer
from expressiveness.models.svr import rbf_kernel

solvers.options.update(
    show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12
)


def oracle_dual(k, y, c, eps):
    """Solve the epsilon-insensitive dual as an explicit QP.

    Variables are stacked (alpha, alpha*); the compact coefficient is
    their difference.
    """
    n = len(y)
    P = np.block([[k, -k], [-k, k]])
    q = np.concatenate([eps - y, eps + y])
    G = np.vstack([-np.eye(2 * n), np.eye(2 * n)])
    h = np.concatenate([np.zeros(2 * n), np.full(2 * n, c)])
    A = np.concatenate([np.ones(n), -np.ones(n)])[None, :]
    sol = solvers.qp(matrix(P), matrix(q), matrix(G), matrix(h), matrix(A), matrix(0.0))
    u = np.asarray(sol["x"]).ravel()
    beta = u[:n] - u[n:]
    objective = 0.5 * beta @ k @ beta + eps * np.abs(beta).sum() - y @ beta
    kb = k @ beta
    interior = (np.abs(beta) > 1e-8) & (np.abs(beta) < c - 1e-8)
    assert np.any(interior), "fixture must keep some multiplier interior"
    bias = float(np.mean(y[interior] - kb[interior] - eps * np.sign(beta[interior])))
    return beta, float(objective), bias


FIXTURE_X = np.array([[-2.0], [-1.0], [0.0], [1.0], [2.0]])
FIXTURE_Y = np.array([1.5, 0.5, 0.0, 0.7, 2.1])


def test_five_point_fixture_matches_qp_oracle():
    c, gamma, eps = 10.0, 0.5, 0.1
    model = fit_svr(FIXTURE_X, FIXTURE_Y, SvrParams(C=c, gamma=gamma, epsilon=eps, tol=1e-6))

    means, sds = fit_standardizer(FIXTURE_X)
    z = (FIXTURE_X - means) / sds
    k = rbf_kernel(z, z, gamma)
    beta_o, obj_o, bias_o = oracle_dual(k, FIXTURE_Y, c, eps)

    assert model.params["dual_objective"] == pytest.approx(obj_o, abs=1e-4)
    grid = np.linspace(-2.5, 2.5, 21)[:, None]
    zg = (grid - means) / sds
    oracle_pred = rbf_kernel(zg, z, gamma) @ beta_o + bias_o
    assert np.allclose(model.predict(grid), oracle_pred, atol=1e-3)
    # predictions at the support vectors themselves
    assert np.allclose(
        model.predict(FIXTURE_X), rbf_kernel(z, z, gamma) @ beta_o + bias_o, atol=1e-3
    )


@pytest.mark.parametrize("c,gamma,eps", [(1.0, 0.3, 0.05), (50.0, 2.0, 0.2)])
def test_random_problems_match_qp_oracle(c, gamma, eps):
    rng = np.random.default_rng(int(c))
    x = rng.normal(size=(12, 2))
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1] + rng.normal(scale=0.1, size=12)
    model = fit_svr(x, y, SvrParams(C=c, gamma=gamma, epsilon=eps, tol=1e-6))

    means, sds = fit_standardizer(x)
    z = (x - means) / sds
    k = rbf_kernel(z, z, gamma)
    beta_o, obj_o, bias_o = oracle_dual(k, y, c, eps)
    assert model.params["dual_objective"] == pytest.approx(obj_o, abs=1e-4)
    probe = rng.normal(size=(8, 2))
    zp = (probe - means) / sds
    oracle_pred = rbf_kernel(zp, z, gamma) @ beta_o + bias_o
    assert np.allclose(model.predict(probe), oracle_pred, atol=1e-3)


def test_constant_target_needs_no_support_vectors():
    x = np.arange(6.0)[:, None]
    model = fit_svr(x, np.full(6, 3.25), SvrParams(C=5.0, gamma=1.0))
    assert model.params["n_support"] == 0
    assert np.allclose(model.predict(x), 3.25)
    assert np.allclose(model.predict(np.array([[99.0]])), 3.25)


def test_duplicating_training_points_keeps_predictions():
    params = SvrParams(C=10.0, gamma=0.5, tol=1e-8)
    base = fit_svr(FIXTURE_X, FIXTURE_Y, params)
    doubled = fit_svr(
        np.vstack([FIXTURE_X, FIXTURE_X]),
        np.concatenate([FIXTURE_Y, FIXTURE_Y]),
        params,
    )
    grid = np.linspace(-3, 3, 25)[:, None]
    assert np.allclose(base.predict(grid), doubled.predict(grid), atol=1e-6)


def test_row_permutation_invariance():
    params = SvrParams(C=10.0, gamma=0.5, tol=1e-8)
    base = fit_svr(FIXTURE_X, FIXTURE_Y, params)
    perm = np.array([3, 0, 4, 1, 2])
    shuffled = fit_svr(FIXTURE_X[perm], FIXTURE_Y[perm], params)
    grid = np.linspace(-3, 3, 25)[:, None]
    assert np.allclose(base.predict(grid), shuffled.predict(grid), atol=1e-6)


def test_box_constraints_and_kkt_residual():
    for c in (0.05, 1.0, 100.0):
        params = SvrParams(C=c, gamma=0.8, tol=1e-6)
        model = fit_svr(FIXTURE_X, FIXTURE_Y, params)
        dual = np.asarray(model.params["dual_coef"])
        assert np.all(np.abs(dual) <= c + 1e-12)
        assert model.params["kkt_residual"] <= params.tol
    # a tiny budget pins every nonzero multiplier to the box edge
    tight = fit_svr(FIXTURE_X, FIXTURE_Y, SvrParams(C=0.05, gamma=0.8, tol=1e-6))
    dual = np.asarray(tight.params["dual_coef"])
    assert np.all(np.isclose(np.abs(dual), 0.05))


def test_kernel_basics():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 3))
    k = rbf_kernel(a, a, gamma=0.7)
    assert np.allclose(np.diag(k), 1.0)
    assert np.allclose(k, k.T)
    assert np.all(k > 0) and np.all(k <= 1.0)
    # exact hand value for a known pair
    u = np.array([[0.0, 0.0]])
    v = np.array([[3.0, 4.0]])
    assert rbf_kernel(u, v, gamma=0.1)[0, 0] == pytest.approx(np.exp(-2.5))


def test_input_validation():
    with pytest.raises(TooShortError):
        fit_svr(np.ones((1, 2)), [1.0], SvrParams(C=1.0, gamma=1.0))
    with pytest.raises(ValueError):
        fit_svr(np.ones((4, 2)), [1.0, 2.0], SvrParams(C=1.0, gamma=1.0))
    with pytest.raises(ValueError):
        SvrParams(C=0.0, gamma=1.0)
    with pytest.raises(ValueError):
        SvrParams(C=1.0, gamma=-1.0)
    with pytest.raises(ValueError):
        SvrParams(C=1.0, gamma=1.0, epsilon=-0.1)
