"""One-factor Bayesian confirmatory factor analysis via Gibbs sampling.

The measurement model for indicator j of participant i is

    x_ij = nu_j + lambda_j * eta_i + e_ij,   e_ij ~ N(0, eps_j)

with the latent score eta_i ~ N(0, 1) fixed to unit variance for
identification. Priors: normal on intercepts and loadings, gamma on the
residual precisions 1/eps_j. Every full conditional is conjugate (normal
for nu, lambda, eta; gamma for the precisions), so the posterior is sampled
by a plain Gibbs sweep with no tuning. Reflection invariance (the sign of
lambda and eta can flip jointly) is resolved at storage time: kept draws
with a negative first loading have all loadings and all latent scores
negated, constraining lambda_1 > 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import LabelVector, TraitTable, zscore
from .errors import (
    DegenerateInputError,
    MissingParticipantError,
    NotConvergedWarning,
    SingularCovarianceError,
    TooShortError,
    ZeroVarianceError,
)

RHAT_THRESHOLD = 1.05


@dataclass(frozen=True)
class CfaConfig:
    """Sampler and prior settings for the one-factor model."""

    n_chains: int = 4
    n_warmup: int = 1000
    n_kept: int = 1000
    prior_loading_mean: float = 0.0
    prior_loading_sd: float = 1.0
    prior_intercept_mean: float = 0.0
    prior_intercept_sd: float = 1.0
    prior_precision_shape: float = 1.0
    prior_precision_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1 or self.n_warmup < 1 or self.n_kept < 1:
            raise ValueError("chain, warmup, and kept counts must be >= 1")
        for name in ("prior_loading_sd", "prior_intercept_sd",
                     "prior_precision_shape", "prior_precision_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class CfaPosterior:
    """Posterior draws organized per chain.

    Array shapes: loadings, residual_variances, intercepts are
    (n_chains, n_kept, p); latent_scores is (n_chains, n_kept, n).
    """

    loadings: np.ndarray
    residual_variances: np.ndarray
    intercepts: np.ndarray
    latent_scores: np.ndarray
    config: CfaConfig

    def __post_init__(self):
        for name in ("loadings", "residual_variances", "intercepts",
                     "latent_scores"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.residual_variances <= 0):
            raise ValueError("residual variance draws must be positive")
        if np.any(self.loadings[:, :, 0] <= 0):
            raise ValueError("first-loading draws must be positive after reflection")

    @property
    def n_indicators(self) -> int:
        return self.loadings.shape[2]

    @property
    def n_participants(self) -> int:
        return self.latent_scores.shape[2]

    def flat(self, name: str) -> np.ndarray:
        """Draws pooled over chains: (n_chains * n_kept, dim)."""
        arr = getattr(self, name)
        return arr.reshape(-1, arr.shape[2])

    def parameter_names(self) -> list[str]:
        p, n = self.n_indicators, self.n_participants
        return (
            [f"loading_{j + 1}" for j in range(p)]
            + [f"residual_variance_{j + 1}" for j in range(p)]
            + [f"intercept_{j + 1}" for j in range(p)]
            + [f"latent_score_{i + 1}" for i in range(n)]
        )

    def _parameter_draws(self) -> np.ndarray:
        """All parameters stacked: (n_chains, n_kept, 3p + n)."""
        return np.concatenate(
            [self.loadings, self.residual_variances, self.intercepts,
             self.latent_scores],
            axis=2,
        )

    def split_rhats(self) -> dict[str, float]:
        draws = self._parameter_draws()
        return {
            name: split_rhat(draws[:, :, idx])
            for idx, name in enumerate(self.parameter_names())
        }

    def summary(self) -> dict[str, dict[str, float]]:
        """Per-parameter posterior mean, SD, central 95% interval, split-Rhat."""
        draws = self._parameter_draws()
        rhats = self.split_rhats()
        out = {}
        for idx, name in enumerate(self.parameter_names()):
            flat = draws[:, :, idx].ravel()
            lo, hi = np.percentile(flat, [2.5, 97.5])
            out[name] = {
                "mean": float(flat.mean()),
                "sd": float(flat.std(ddof=1)),
                "ci_low": float(lo),
                "ci_high": float(hi),
                "rhat": rhats[name],
            }
        return out


@dataclass(frozen=True)
class FitIndices:
    """Posterior mean and SD of two covariance-structure fit indices."""

    gamma_hat: float
    cfi: float
    gamma_hat_sd: float
    cfi_sd: float

    def __post_init__(self):
        for name in ("gamma_hat", "cfi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def as_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "gamma_hat_sd": self.gamma_hat_sd,
            "cfi": self.cfi,
            "cfi_sd": self.cfi_sd,
        }


def split_rhat(draws: np.ndarray) -> float:
    """Split-Rhat over an (n_chains, n_draws) array of one parameter."""
    n_chains, n_draws = draws.shape
    half = n_draws // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain for split-Rhat")
    seqs = np.concatenate([draws[:, :half], draws[:, n_draws - half:]], axis=0)
    within = seqs.var(axis=1, ddof=1).mean()
    if within == 0.0:
        return 1.0
    between = half * seqs.mean(axis=1).var(ddof=1)
    var_plus = (half - 1) / half * within + between / half
    return float(np.sqrt(var_plus / within))


def _sweep(x, lam, nu, tau, eta, cfg: CfaConfig, rng: np.random.Generator):
    """One full Gibbs sweep; returns fresh (lam, nu, tau, eta) arrays.

    Sweep order is eta, lambda, nu, tau; each block is drawn from its
    exact full conditional.
    """
    n, p = x.shape
    prior_lam_prec = 1.0 / cfg.prior_loading_sd**2
    prior_nu_prec = 1.0 / cfg.prior_intercept_sd**2

    # eta_i | rest ~ N(mean_i, 1 / prec): unit-variance prior plus one
    # precision-weighted term per indicator.
    prec = 1.0 + float(np.sum(lam**2 * tau))
    mean = ((x - nu) @ (lam * tau)) / prec
    eta = mean + rng.standard_normal(n) / np.sqrt(prec)

    # lambda_j | rest: normal regression of centered x_j on eta.
    eta_ss = float(eta @ eta)
    lam_prec = prior_lam_prec + tau * eta_ss
    lam_mean = (prior_lam_prec * cfg.prior_loading_mean
                + tau * (eta @ (x - nu))) / lam_prec
    lam = lam_mean + rng.standard_normal(p) / np.sqrt(lam_prec)

    # nu_j | rest: normal update from the residual x_j - lambda_j eta.
    nu_prec = prior_nu_prec + n * tau
    nu_mean = (prior_nu_prec * cfg.prior_intercept_mean
               + tau * np.sum(x - np.outer(eta, lam), axis=0)) / nu_prec
    nu = nu_mean + rng.standard_normal(p) / np.sqrt(nu_prec)

    # tau_j | rest: conjugate gamma on the residual precision.
    resid = x - nu - np.outer(eta, lam)
    shape = cfg.prior_precision_shape + 0.5 * n
    rate = cfg.prior_precision_rate + 0.5 * np.sum(resid**2, axis=0)
    tau = rng.gamma(shape, 1.0 / rate)

    return lam, nu, tau, eta


def _run_chain(x, cfg: CfaConfig, chain_index: int):
    """Run one chain; returns kept (lam, eps, nu, eta) draw arrays."""
    n, p = x.shape
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chain_index]))
    lam = np.ones(p)
    nu = x.mean(axis=0)
    tau = np.ones(p)
    eta = np.zeros(n)  # resampled first thing in the sweep

    for _ in range(cfg.n_warmup):
        lam, nu, tau, eta = _sweep(x, lam, nu, tau, eta, cfg, rng)

    lam_draws = np.empty((cfg.n_kept, p))
    eps_draws = np.empty((cfg.n_kept, p))
    nu_draws = np.empty((cfg.n_kept, p))
    eta_draws = np.empty((cfg.n_kept, n))
    for t in range(cfg.n_kept):
        lam, nu, tau, eta = _sweep(x, lam, nu, tau, eta, cfg, rng)
        flip = -1.0 if lam[0] < 0 else 1.0  # storage-time reflection
        lam_draws[t] = flip * lam
        eps_draws[t] = 1.0 / tau
        nu_draws[t] = nu
        eta_draws[t] = flip * eta
    return lam_draws, eps_draws, nu_draws, eta_draws


def fit_cfa(indicators, config: CfaConfig | None = None) -> CfaPosterior:
    """Sample the one-factor model posterior.

    Expects the indicator matrix already standardized per column. Chains
    use independent RNG streams derived from (seed, chain index), so the
    result is reproducible and independent of chain scheduling. Emits
    NotConvergedWarning (and still returns the posterior) if any
    parameter's split-Rhat exceeds 1.05.
    """
    cfg = config or CfaConfig()
    x = np.asarray(indicators, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("indicators must be an n x p matrix with p >= 2")
    if x.shape[0] < 10:
        raise TooShortError(f"need at least 10 rows, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError("indicators contain non-finite values")
    spans = np.ptp(x, axis=0)
    if np.any(spans == 0):
        j = int(np.argmax(spans == 0))
        raise DegenerateInputError(f"indicator column {j} has zero variance")

    results = [_run_chain(x, cfg, c) for c in range(cfg.n_chains)]
    posterior = CfaPosterior(
        loadings=np.stack([r[0] for r in results]),
        residual_variances=np.stack([r[1] for r in results]),
        intercepts=np.stack([r[2] for r in results]),
        latent_scores=np.stack([r[3] for r in results]),
        config=cfg,
    )
    rhats = posterior.split_rhats()
    worst = max(rhats, key=rhats.get)
    if rhats[worst] > RHAT_THRESHOLD:
        warnings.warn(
            f"split-Rhat {rhats[worst]:.3f} for {worst} exceeds "
            f"{RHAT_THRESHOLD}; chains may not have converged",
            NotConvergedWarning,
            stacklevel=2,
        )
    return posterior


def sample_covariance(indicators) -> np.ndarray:
    """Unbiased (n-1 denominator) sample covariance of the indicators."""
    x = np.asarray(indicators, dtype=float)
    return np.cov(x, rowvar=False, ddof=1)


def _discrepancies(lams, epss, sample_cov):
    """Likelihood discrepancy F for each (loading, residual) draw, vectorized.

    Determinant and inverse of lam lam' + diag(eps) come from the matrix
    determinant lemma and the Sherman-Morrison identity, so no per-draw
    linear algebra is needed.
    """
    s = np.asarray(sample_cov, dtype=float)
    p = s.shape[0]
    sign, logdet_s = np.linalg.slogdet(s)
    if sign <= 0:
        raise SingularCovarianceError("sample covariance is not positive definite")
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "sample covariance is not positive definite"
        ) from exc

    u = lams / epss  # (draws, p)
    c = 1.0 + np.sum(lams * u, axis=1)  # 1 + lam' D^-1 lam
    logdet_sigma = np.sum(np.log(epss), axis=1) + np.log(c)
    tr_d = np.sum(np.diag(s) / epss, axis=1)
    tr_corr = np.einsum("dp,pq,dq->d", u, s, u) / c
    return logdet_sigma + (tr_d - tr_corr) - logdet_s - p


def _indices_from_chisq(chisq, chisq_base, df, df_base, n, p):
    gamma = p / (p + 2.0 * (chisq - df) / n)
    gamma = np.clip(gamma, 0.0, 1.0)
    num = np.maximum(chisq - df, 0.0)
    den = np.maximum(np.maximum(chisq_base - df_base, chisq - df), 0.0)
    cfi = np.where(den > 0, 1.0 - num / np.where(den > 0, den, 1.0), 1.0)
    cfi = np.clip(cfi, 0.0, 1.0)
    return gamma, cfi


def fit_indices(posterior: CfaPosterior, sample_cov, n: int) -> FitIndices:
    """Gamma-hat and CFI, computed per posterior draw and averaged.

    Per draw, the model-implied covariance lam lam' + diag(eps) is compared
    to the sample covariance through the normal-theory discrepancy; the
    baseline model keeps the sample variances with all covariances zero.
    Both indices are clamped into [0, 1].
    """
    s = np.asarray(sample_cov, dtype=float)
    p = s.shape[0]
    if s.shape != (p, p) or not np.allclose(s, s.T, atol=1e-10):
        raise SingularCovarianceError("sample covariance must be symmetric")
    lams = posterior.flat("loadings")
    epss = posterior.flat("residual_variances")
    f_draws = _discrepancies(lams, epss, s)
    chisq = (n - 1) * f_draws

    _, logdet_s = np.linalg.slogdet(s)
    f_base = float(np.sum(np.log(np.diag(s))) - logdet_s)
    chisq_base = (n - 1) * f_base
    df = p * (p + 1) // 2 - 2 * p
    df_base = p * (p - 1) // 2

    gamma, cfi = _indices_from_chisq(chisq, chisq_base, df, df_base, n, p)
    return FitIndices(
        gamma_hat=float(gamma.mean()),
        cfi=float(cfi.mean()),
        gamma_hat_sd=float(gamma.std(ddof=1)),
        cfi_sd=float(cfi.std(ddof=1)),
    )


def point_fit_indices(loadings, residual_variances, sample_cov, n: int) -> dict:
    """Single-point (non-averaged) indices for a fixed parameter vector."""
    s = np.asarray(sample_cov, dtype=float)
    p = s.shape[0]
    lams = np.asarray(loadings, dtype=float)[None, :]
    epss = np.asarray(residual_variances, dtype=float)[None, :]
    chisq = (n - 1) * _discrepancies(lams, epss, s)
    _, logdet_s = np.linalg.slogdet(s)
    chisq_base = (n - 1) * float(np.sum(np.log(np.diag(s))) - logdet_s)
    df = p * (p + 1) // 2 - 2 * p
    df_base = p * (p - 1) // 2
    gamma, cfi = _indices_from_chisq(chisq, chisq_base, df, df_base, n, p)
    return {"gamma_hat": float(gamma[0]), "cfi": float(cfi[0])}


def factor_scores(
    posterior: CfaPosterior, participant_ids: tuple[str, ...] | None = None
) -> LabelVector:
    """Posterior-mean latent score per participant, re-standardized."""
    means = posterior.flat("latent_scores").mean(axis=0)
    if participant_ids is None:
        participant_ids = tuple(
            f"s{i + 1}" for i in range(posterior.n_participants)
        )
    return LabelVector(tuple(participant_ids), zscore(means))


def external_validity(scores: LabelVector, traits: TraitTable) -> dict[str, float]:
    """Pearson correlation of the factor scores with each trait column."""
    if traits.participant_ids != scores.participant_ids:
        pos = {p: i for i, p in enumerate(traits.participant_ids)}
        for p in scores.participant_ids:
            if p not in pos:
                raise MissingParticipantError(p, "traits")
        idx = [pos[p] for p in scores.participant_ids]
        traits = TraitTable(
            scores.participant_ids, traits.trait_names, traits.values[idx]
        )
    out = {}
    x = scores.values
    for name in traits.trait_names:
        y = traits.column(name)
        if np.ptp(y) == 0:
            raise ZeroVarianceError(f"trait column {name!r} has zero variance")
        out[name] = float(np.corrcoef(x, y)[0, 1])
    return out
