"""Tests for the synthetic-study generator and its ground-truth outputs."""

from __future__ import annotations

import json

import numpy as np
import pytest

from expressiveness import (
    ConfigError,
    FeatureSpec,
    SynthConfig,
    generate_synthetic,
    icc_average_raters,
    load_dataset,
    load_ratings,
    rating_matrices,
    save_synthetic,
)


def test_default_scale_and_identifiers():
    data = generate_synthetic(SynthConfig(), seed=0)
    ds = data.dataset
    assert len(ds.participant_ids) == 96
    assert ds.participant_ids[0] == "p01" and ds.participant_ids[-1] == "p96"
    assert len(ds.groups.group_ids) == 32
    assert all(len(ds.groups.members(g)) == 3 for g in ds.groups.group_ids)
    assert ds.features.values.shape == (96, 13)
    assert ds.features.modalities.count("visual") == 6
    assert ds.features.modalities.count("linguistic") == 7
    assert ds.labels.is_standardized()
    assert ds.traits is not None
    assert ds.traits.values.shape == (96, 5)

    assert data.question_means.shape == (96, 4)
    assert data.indicator_means.shape == (96, 4)
    assert len(data.rating_rows) == 96 * 4 * 8
    scores = np.array([row[3] for row in data.rating_rows])
    assert np.all((scores >= 0) & (scores <= 4))
    assert scores.dtype.kind == "i"


def test_generation_is_deterministic():
    a = generate_synthetic(SynthConfig(), seed=42)
    b = generate_synthetic(SynthConfig(), seed=42)
    assert np.array_equal(a.true_trait, b.true_trait)
    assert np.array_equal(a.dataset.features.values, b.dataset.features.values)
    assert np.array_equal(a.dataset.labels.values, b.dataset.labels.values)
    assert a.rating_rows == b.rating_rows

    c = generate_synthetic(SynthConfig(), seed=43)
    assert not np.array_equal(a.true_trait, c.true_trait)


def test_labels_are_standardized_truth():
    data = generate_synthetic(SynthConfig(), seed=1)
    eta = data.true_trait
    labels = data.dataset.labels.values
    assert np.corrcoef(labels, eta)[0, 1] == pytest.approx(1.0)
    assert labels.mean() == pytest.approx(0.0, abs=1e-12)
    assert labels.std() == pytest.approx(1.0)


def test_planted_features_carry_signal_noise_features_do_not():
    data = generate_synthetic(SynthConfig(), seed=2)
    ds = data.dataset
    eta = data.true_trait
    names = ds.features.feature_names
    corr = {
        name: float(np.corrcoef(ds.features.values[:, j], eta)[0, 1])
        for j, name in enumerate(names)
    }
    # coef 0.4, noise 0.6: population correlation 0.4/sqrt(0.4^2+0.6^2) = 0.55
    assert corr["planted_linguistic_a"] > 0.4
    assert corr["planted_visual_a"] > 0.15
    assert corr["planted_linguistic_b"] > 0.15
    assert corr["planted_linguistic_a"] > corr["planted_visual_a"]
    for name, value in corr.items():
        if name.startswith("noise_"):
            assert abs(value) < 0.3
    assert data.true_coefs["planted_linguistic_a"] == 0.4
    assert data.true_coefs["noise_visual_0"] == 0.0


def test_trait_columns_track_their_coefficients():
    data = generate_synthetic(SynthConfig(), seed=3)
    traits = data.dataset.traits
    eta = data.true_trait
    extraversion = traits.column("extraversion")
    openness = traits.column("openness")
    assert np.corrcoef(extraversion, eta)[0, 1] == pytest.approx(0.26, abs=0.2)
    assert abs(np.corrcoef(openness, eta)[0, 1]) < 0.25


def test_indicator_means_are_rater_averages():
    data = generate_synthetic(SynthConfig(n_groups=4), seed=4)
    ds = data.dataset
    sums: dict[tuple[str, str], list[int]] = {}
    for pid, _rater, question, score in data.rating_rows:
        sums.setdefault((pid, question), []).append(score)
    for i, pid in enumerate(ds.participant_ids):
        for q in range(4):
            want = np.mean(sums[(pid, f"q{q + 1}")])
            assert data.indicator_means[i, q] == want


def test_noise_free_generator_gives_perfect_agreement(tmp_path):
    config = SynthConfig(
        loadings=(1.0, 1.0, 1.0, 1.0),
        residual_variances=(0.0, 0.0, 0.0, 0.0),
        rater_noise_sd=0.0,
    )
    data = generate_synthetic(config, seed=5)
    eta = data.true_trait
    # all four question means equal 2 + eta, so their rank orders agree
    for q in range(4):
        assert np.array_equal(
            np.argsort(data.question_means[:, q]), np.argsort(eta)
        )
        assert np.allclose(data.question_means[:, q], 2.0 + eta)

    save_synthetic(data, tmp_path)
    by_question = load_ratings(tmp_path / "ratings.csv")
    for qid, raters in by_question.items():
        for matrix in rating_matrices(raters, qid):
            assert icc_average_raters(matrix).icc == 1.0


def test_save_load_round_trip(tmp_path):
    data = generate_synthetic(SynthConfig(n_groups=8), seed=6)
    manifest = save_synthetic(data, tmp_path)
    assert manifest.exists()
    for name in ("ratings.csv", "indicators.csv", "truth.json"):
        assert (tmp_path / name).exists()

    ds = load_dataset(manifest)
    assert ds.participant_ids == data.dataset.participant_ids
    assert np.array_equal(ds.features.values, data.dataset.features.values)
    assert np.array_equal(ds.labels.values, data.dataset.labels.values)
    assert ds.groups.mapping == data.dataset.groups.mapping
    assert np.array_equal(ds.traits.values, data.dataset.traits.values)

    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth["true_coefs"]["planted_visual_a"] == 0.2
    assert len(truth["true_trait"]) == 24

    lines = (tmp_path / "indicators.csv").read_text().splitlines()
    assert lines[0] == "participant_id,q1,q2,q3,q4"
    first = lines[1].split(",")
    assert np.allclose(
        [float(v) for v in first[1:]], data.indicator_means[0]
    )


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(n_raters=1)
    with pytest.raises(ConfigError):
        SynthConfig(rater_noise_sd=-0.1)
    with pytest.raises(ConfigError):
        SynthConfig(n_groups=0)
    with pytest.raises(ConfigError):
        SynthConfig(loadings=(1.0, 1.0), residual_variances=(0.1,))
    with pytest.raises(ConfigError):
        SynthConfig(loadings=(1.0,), residual_variances=(0.1,))
    with pytest.raises(ConfigError):
        SynthConfig(residual_variances=(-0.1, 0.1, 0.1, 0.1))
    with pytest.raises(ConfigError):
        SynthConfig(features=())
    with pytest.raises(ConfigError):
        SynthConfig(features=(
            FeatureSpec("dup", "visual"), FeatureSpec("dup", "linguistic"),
        ))
    with pytest.raises(ConfigError):
        FeatureSpec("bad", "acoustic")
    with pytest.raises(ConfigError):
        FeatureSpec("bad", "visual", noise_sd=-1.0)
