"""Synthetic datasets with known ground truth for end-to-end testing.

Real group-interaction recordings are access-restricted, so verification
runs on generated data built from the same latent structure the pipeline
assumes: a standard-normal latent trait per participant drives four rating
questions through a one-factor measurement model, raters add noise and
discretize onto the 0-4 scale, and behavioral features are planted linear
signals in the trait plus independent noise. Labels are the standardized
true trait values, so every downstream estimate has an exact oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Dataset,
    FeatureTable,
    GroupAssignment,
    LabelVector,
    TraitTable,
    save_dataset,
    zscore,
)
from .errors import ConfigError

DEFAULT_LOADINGS = (0.97, 0.95, 0.96, 0.87)
DEFAULT_RESIDUAL_VARIANCES = (0.07, 0.11, 0.08, 0.24)


@dataclass(frozen=True)
class FeatureSpec:
    """One synthetic feature: value = coef * trait + Normal(0, noise_sd)."""

    name: str
    modality: str
    coef: float = 0.0
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.modality not in ("visual", "linguistic"):
            raise ConfigError(f"feature {self.name!r}: unknown modality "
                              f"{self.modality!r}")
        if self.noise_sd < 0:
            raise ConfigError(f"feature {self.name!r}: noise_sd must be >= 0")


def _default_features() -> tuple[FeatureSpec, ...]:
    planted = [
        FeatureSpec("planted_linguistic_a", "linguistic", coef=0.4, noise_sd=0.6),
        FeatureSpec("planted_visual_a", "visual", coef=0.2, noise_sd=0.6),
        FeatureSpec("planted_linguistic_b", "linguistic", coef=0.2, noise_sd=0.6),
    ]
    noise = [
        FeatureSpec(f"noise_visual_{k}", "visual", coef=0.0, noise_sd=1.0)
        for k in range(5)
    ] + [
        FeatureSpec(f"noise_linguistic_{k}", "linguistic", coef=0.0, noise_sd=1.0)
        for k in range(5)
    ]
    return tuple(planted + noise)


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; defaults mirror the study's scale (32 triads)."""

    n_groups: int = 32
    group_size: int = 3
    loadings: tuple[float, ...] = DEFAULT_LOADINGS
    residual_variances: tuple[float, ...] = DEFAULT_RESIDUAL_VARIANCES
    features: tuple[FeatureSpec, ...] = field(default_factory=_default_features)
    n_raters: int = 8
    rater_noise_sd: float = 0.5
    trait_coefs: dict[str, float] = field(default_factory=lambda: {
        "neuroticism": -0.07,
        "extraversion": 0.26,
        "openness": 0.0,
        "agreeableness": 0.28,
        "conscientiousness": 0.0,
    })

    def __post_init__(self):
        if self.n_groups < 1 or self.group_size < 1:
            raise ConfigError("n_groups and group_size must be >= 1")
        if self.n_raters < 2:
            raise ConfigError("need at least 2 raters")
        if self.rater_noise_sd < 0:
            raise ConfigError("rater_noise_sd must be >= 0")
        if len(self.loadings) != len(self.residual_variances):
            raise ConfigError("loadings and residual_variances lengths differ")
        if len(self.loadings) < 2:
            raise ConfigError("need at least 2 rating questions")
        if any(v < 0 for v in self.residual_variances):
            raise ConfigError("residual variances must be >= 0")
        if not self.features:
            raise ConfigError("need at least one feature spec")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        object.__setattr__(self, "loadings", tuple(self.loadings))
        object.__setattr__(
            self, "residual_variances", tuple(self.residual_variances)
        )
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def n_participants(self) -> int:
        return self.n_groups * self.group_size

    @property
    def n_questions(self) -> int:
        return len(self.loadings)


@dataclass(frozen=True, eq=False)
class SynthData:
    """Generated dataset plus the ground truth that produced it."""

    dataset: Dataset
    question_means: np.ndarray  # pre-discretization, participants x questions
    indicator_means: np.ndarray  # discretized scores averaged across raters
    rating_rows: tuple[tuple[str, str, str, int], ...]
    true_trait: np.ndarray
    true_coefs: dict[str, float]


def generate_synthetic(config: SynthConfig, seed: int = 0) -> SynthData:
    """Draw a full synthetic study; deterministic given the seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    n = config.n_participants
    width = len(str(n))
    pids = tuple(f"p{i + 1:0{width}d}" for i in range(n))
    gwidth = len(str(config.n_groups))
    mapping = {
        pid: f"g{i // config.group_size + 1:0{gwidth}d}"
        for i, pid in enumerate(pids)
    }
    groups = GroupAssignment(mapping, group_size=config.group_size)

    eta = rng.standard_normal(n)

    # Measurement model on the standardized scale, shifted by 2 so the
    # scale midpoint carries eta = 0; rater noise then discretizes.
    lam = np.asarray(config.loadings)
    eps_sd = np.sqrt(np.asarray(config.residual_variances))
    centered = eta[:, None] * lam + rng.standard_normal(
        (n, config.n_questions)
    ) * eps_sd
    question_means = 2.0 + centered

    rating_rows = []
    rater_noise = rng.standard_normal(
        (n, config.n_questions, config.n_raters)
    ) * config.rater_noise_sd
    scores = np.clip(np.rint(question_means[:, :, None] + rater_noise), 0, 4)
    for i, pid in enumerate(pids):
        for q in range(config.n_questions):
            for r in range(config.n_raters):
                rating_rows.append(
                    (pid, f"r{r + 1}", f"q{q + 1}", int(scores[i, q, r]))
                )

    columns = []
    for spec in config.features:
        noise = rng.standard_normal(n) * spec.noise_sd
        columns.append(spec.coef * eta + noise)
    features = FeatureTable(
        participant_ids=pids,
        feature_names=tuple(f.name for f in config.features),
        modalities=tuple(f.modality for f in config.features),
        values=np.column_stack(columns),
    )

    labels = LabelVector(pids, zscore(eta))

    trait_names = tuple(config.trait_coefs)
    trait_cols = [
        config.trait_coefs[t] * eta
        + rng.standard_normal(n) * np.sqrt(max(0.0, 1 - config.trait_coefs[t] ** 2))
        for t in trait_names
    ]
    traits = TraitTable(pids, trait_names, np.column_stack(trait_cols))

    dataset = Dataset(features=features, labels=labels, groups=groups,
                      traits=traits)
    return SynthData(
        dataset=dataset,
        question_means=question_means,
        indicator_means=scores.mean(axis=2),
        rating_rows=tuple(rating_rows),
        true_trait=eta,
        true_coefs={f.name: f.coef for f in config.features},
    )


def save_synthetic(data: SynthData, out_dir) -> Path:
    """Write dataset CSVs, manifest, ratings, and the generating truth."""
    out = Path(out_dir)
    manifest_path = save_dataset(data.dataset, out)
    with open(out / "ratings.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("video_id,rater_id,question_id,score\n")
        for video, rater, question, score in data.rating_rows:
            fh.write(f"{video},{rater},{question},{score}\n")
    n_questions = data.indicator_means.shape[1]
    with open(out / "indicators.csv", "w", newline="", encoding="utf-8") as fh:
        header = ["participant_id"] + [f"q{j + 1}" for j in range(n_questions)]
        fh.write(",".join(header) + "\n")
        for pid, row in zip(data.dataset.participant_ids, data.indicator_means):
            fh.write(",".join([pid] + [repr(float(v)) for v in row]) + "\n")
    truth = {
        "true_trait": {
            pid: float(v)
            for pid, v in zip(data.dataset.participant_ids, data.true_trait)
        },
        "true_coefs": data.true_coefs,
    }
    (out / "truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_path
