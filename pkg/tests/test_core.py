"""Shared data structures: standardization, binning, tables, persistence."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressiveness.core import (
    Dataset,
    FeatureTable,
    GroupAssignment,
    LabelVector,
    TraitTable,
    load_dataset,
    load_feature_table,
    load_labels,
    merge_feature_tables,
    quartile_bins,
    save_dataset,
    save_feature_table,
    save_labels,
    zscore,
)
from expressiveness.errors import (
    DegenerateLabelsWarning,
    MissingParticipantError,
    ZeroVarianceError,
)


def test_zscore_centers_and_scales():
    x = np.array([2.0, 4.0, 6.0, 8.0])
    z = zscore(x)
    assert abs(z.mean()) < 1e-12
    assert abs(z.std() - 1.0) < 1e-12
    # population SD convention: [-1.34..., -0.44..., 0.44..., 1.34...]
    assert np.allclose(z, (x - 5.0) / np.sqrt(5.0))


def test_zscore_rejects_constant():
    with pytest.raises(ZeroVarianceError):
        zscore(np.ones(5))


@given(
    st.lists(
        st.floats(-1e6, 1e6, allow_nan=False, width=64), min_size=3, max_size=60
    ).filter(lambda v: max(v) - min(v) > 1e-6)
)
@settings(max_examples=60, deadline=None)
def test_zscore_is_affine_invariant(values):
    x = np.asarray(values)
    z1 = zscore(x)
    z2 = zscore(3.5 * x + 11.0)
    assert np.allclose(z1, z2, atol=1e-8)


def test_quartile_bins_balanced_sizes():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(103)
    bins = quartile_bins(x)
    counts = np.bincount(bins, minlength=4)
    # 103 = 26 + 26 + 26 + 25, larger bins first
    assert counts.tolist() == [26, 26, 26, 25]
    assert bins.min() == 0 and bins.max() == 3


def test_quartile_bins_orders_by_value():
    x = np.array([10.0, 1.0, 7.0, 3.0, 9.0, 2.0, 8.0, 4.0])
    bins = quartile_bins(x)
    order = np.argsort(x)
    assert bins[order].tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_quartile_bins_constant_input_warns():
    with pytest.warns(DegenerateLabelsWarning):
        bins = quartile_bins(np.full(8, 2.5))
    assert bins.tolist() == [0] * 8


def test_feature_table_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        FeatureTable(
            participant_ids=("a", "b"),
            feature_names=("f1", "f2"),
            modalities=("visual",),  # one modality tag for two features
            values=np.zeros((2, 2)),
        )


def test_feature_table_select_modality():
    table = FeatureTable(
        participant_ids=("a", "b"),
        feature_names=("f1", "f2", "f3"),
        modalities=("visual", "linguistic", "visual"),
        values=np.arange(6.0).reshape(2, 3),
    )
    vis = table.select_modality("visual")
    assert vis.feature_names == ("f1", "f3")
    assert np.allclose(vis.values, [[0.0, 2.0], [3.0, 5.0]])
    # the multimodal view lives at the evaluation layer, not here
    with pytest.raises(ValueError):
        table.select_modality("multimodal")


def test_merge_feature_tables_requires_matching_participants():
    a = FeatureTable(("p1", "p2"), ("f1",), ("visual",), np.zeros((2, 1)))
    b = FeatureTable(("p1", "p3"), ("f2",), ("linguistic",), np.ones((2, 1)))
    with pytest.raises(MissingParticipantError):
        merge_feature_tables([a, b])


def test_merge_feature_tables_concatenates_columns():
    a = FeatureTable(("p1", "p2"), ("f1",), ("visual",), np.array([[1.0], [2.0]]))
    b = FeatureTable(
        ("p1", "p2"), ("f2",), ("linguistic",), np.array([[10.0], [20.0]])
    )
    merged = merge_feature_tables([a, b])
    assert merged.participant_ids == ("p1", "p2")
    assert merged.feature_names == ("f1", "f2")
    assert merged.modalities == ("visual", "linguistic")
    assert np.allclose(merged.values, [[1.0, 10.0], [2.0, 20.0]])


def test_feature_table_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    table = FeatureTable(
        participant_ids=("p1", "p2", "p3"),
        feature_names=("a b", "c"),
        modalities=("visual", "linguistic"),
        values=rng.standard_normal((3, 2)),
    )
    path = tmp_path / "features.csv"
    save_feature_table(table, path)
    back = load_feature_table(path)
    assert back.participant_ids == table.participant_ids
    assert back.feature_names == table.feature_names
    assert back.modalities == table.modalities
    # repr round-trip: bit-for-bit equality, not mere closeness
    assert np.array_equal(back.values, table.values)


def test_labels_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(4)
    labels = LabelVector(("p1", "p2", "p3", "p4"), zscore(rng.standard_normal(4)))
    path = tmp_path / "labels.csv"
    save_labels(labels, path)
    back = load_labels(path)
    assert np.array_equal(back.values, labels.values)
    assert back.is_standardized()


def test_label_vector_standardized_flag():
    raw = LabelVector(("a", "b", "c"), np.array([1.0, 5.0, 9.0]))
    assert not raw.is_standardized()
    std = raw.standardized()
    assert std.is_standardized()
    assert std.participant_ids == raw.participant_ids


def test_group_assignment_lookup():
    ga = GroupAssignment(
        {"p1": "g1", "p2": "g1", "p3": "g1", "p4": "g2", "p5": "g2", "p6": "g2"}
    )
    assert ga.group_ids == ("g1", "g2")
    assert ga.members("g2") == ("p4", "p5", "p6")
    assert ga.group_of("p2") == "g1"


def test_trait_table_column_access():
    tt = TraitTable(
        participant_ids=("p1", "p2"),
        trait_names=("extraversion", "openness"),
        values=np.array([[0.1, 0.2], [0.3, 0.4]]),
    )
    assert np.allclose(tt.column("openness"), [0.2, 0.4])
    with pytest.raises(ValueError):
        tt.column("humility")


def test_dataset_requires_exact_participant_match():
    features = FeatureTable(("p1", "p2"), ("f",), ("visual",), np.zeros((2, 1)))
    labels = LabelVector(("p1", "p3"), np.array([-1.0, 1.0]))
    groups = GroupAssignment({"p1": "g1", "p2": "g1"}, group_size=2)
    with pytest.raises(MissingParticipantError):
        Dataset(features=features, labels=labels, groups=groups, traits=None)


def test_dataset_roundtrip_through_manifest(tmp_path):
    rng = np.random.default_rng(9)
    n = 6
    pids = tuple(f"p{i}" for i in range(n))
    features = FeatureTable(
        pids, ("f1", "f2"), ("visual", "linguistic"), rng.standard_normal((n, 2))
    )
    labels = LabelVector(pids, zscore(rng.standard_normal(n)))
    groups = GroupAssignment({p: f"g{i // 3}" for i, p in enumerate(pids)})
    traits = TraitTable(pids, ("extraversion",), rng.standard_normal((n, 1)))
    ds = Dataset(features=features, labels=labels, groups=groups, traits=traits)
    manifest = save_dataset(ds, tmp_path)
    back = load_dataset(manifest)
    assert np.array_equal(back.features.values, ds.features.values)
    assert np.array_equal(back.labels.values, ds.labels.values)
    assert back.groups.mapping == ds.groups.mapping
    assert np.array_equal(back.traits.values, ds.traits.values)


def test_arrays_are_read_only():
    table = FeatureTable(("p1",), ("f",), ("visual",), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        table.values[0, 0] = 5.0
