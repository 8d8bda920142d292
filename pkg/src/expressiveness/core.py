"""Shared data types, standardization, quartile binning, and dataset I/O.

Every container here is immutable after construction: numpy arrays are
stored as read-only copies and id sequences as tuples, so instances can be
shared freely across threads and processes.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateLabelsWarning,
    MissingParticipantError,
    NonFiniteValueError,
    ParseError,
    TooShortError,
    ZeroVarianceError,
)

VISUAL = "visual"
LINGUISTIC = "linguistic"
MODALITIES = (VISUAL, LINGUISTIC)

TRAIT_NAMES = (
    "neuroticism",
    "extraversion",
    "openness",
    "agreeableness",
    "conscientiousness",
)


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def zscore(values) -> np.ndarray:
    """Standardize a vector to zero mean and unit variance.

    Uses the population standard deviation (divide by n): the input is
    treated as a fixed sample to be rescaled, not as an estimate of a
    wider population. Applying zscore twice gives the same output as
    applying it once (up to floating point).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if arr.size < 2:
        raise TooShortError(f"need at least 2 values to standardize, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError("cannot standardize non-finite values")
    if np.ptp(arr) == 0.0:
        raise ZeroVarianceError("cannot standardize a constant vector")
    return (arr - arr.mean()) / arr.std()


def quartile_bins(labels) -> np.ndarray:
    """Assign each label to a quartile bin 0..3 by rank.

    Bin sizes differ by at most one (remainder goes to the lower bins) and
    bins are monotone in label value. Ties are broken by stable sort on
    input position, so binning is deterministic. A constant input collapses
    to bin 0 with a DegenerateLabelsWarning.
    """
    arr = np.asarray(labels, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if arr.size < 4:
        raise TooShortError(f"need at least 4 labels to bin, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError("cannot bin non-finite labels")
    if arr.max() == arr.min():
        warnings.warn(
            "labels are constant; all assigned to quartile bin 0",
            DegenerateLabelsWarning,
            stacklevel=2,
        )
        return np.zeros(arr.size, dtype=int)
    order = np.argsort(arr, kind="stable")
    bins = np.empty(arr.size, dtype=int)
    start = 0
    base, extra = divmod(arr.size, 4)
    for b in range(4):
        size = base + (1 if b < extra else 0)
        bins[order[start : start + size]] = b
        start += size
    return bins


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Complete subjects-by-raters grid of ordinal scores for one question."""

    question_id: str
    scores: np.ndarray
    subject_ids: tuple[str, ...]
    rater_ids: tuple[str, ...]
    score_range: tuple[int, int] = (0, 4)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-D subjects x raters grid")
        n, k = scores.shape
        if n < 2:
            raise ValueError(f"need at least 2 subjects, got {n}")
        if k < 2:
            raise ValueError(f"need at least 2 raters, got {k}")
        if not np.all(np.isfinite(scores)):
            raise NonFiniteValueError("rating grid has missing or non-finite cells")
        lo, hi = self.score_range
        if scores.min() < lo or scores.max() > hi:
            raise ValueError(f"scores outside declared range [{lo}, {hi}]")
        if len(self.subject_ids) != n:
            raise ValueError("subject_ids length does not match score rows")
        if len(self.rater_ids) != k:
            raise ValueError("rater_ids length does not match score columns")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "rater_ids", tuple(self.rater_ids))

    @property
    def n_subjects(self) -> int:
        return self.scores.shape[0]

    @property
    def n_raters(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Participants-by-features matrix of behavioral signals.

    Each feature carries a modality tag ('visual' or 'linguistic'). The CSV
    form encodes the tag as a header prefix: ``visual:Mean Landmark
    Displacement``.
    """

    participant_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    modalities: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        names = tuple(self.feature_names)
        mods = tuple(self.modalities)
        pids = tuple(self.participant_ids)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D participants x features matrix")
        if values.shape != (len(pids), len(names)):
            raise ValueError("values shape does not match ids/names")
        if len(mods) != len(names):
            raise ValueError("one modality tag required per feature")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if len(set(pids)) != len(pids):
            raise ValueError("participant ids must be unique")
        for m in mods:
            if m not in MODALITIES:
                raise ValueError(f"unknown modality tag {m!r}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteValueError(
                f"non-finite feature value for participant "
                f"{pids[bad[0]]!r}, feature {names[bad[1]]!r}",
                row=int(bad[0]),
                column=int(bad[1]),
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "participant_ids", pids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "modalities", mods)

    @property
    def n_participants(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def select_modality(self, modality: str) -> "FeatureTable":
        """Subset the table to one modality's columns."""
        if modality not in MODALITIES:
            raise ValueError(f"unknown modality tag {modality!r}")
        keep = [i for i, m in enumerate(self.modalities) if m == modality]
        if not keep:
            raise ValueError(f"no features tagged {modality!r}")
        return FeatureTable(
            participant_ids=self.participant_ids,
            feature_names=tuple(self.feature_names[i] for i in keep),
            modalities=tuple(self.modalities[i] for i in keep),
            values=self.values[:, keep],
        )


def merge_feature_tables(tables) -> FeatureTable:
    """Concatenate feature columns from tables sharing one participant set."""
    tables = list(tables)
    if not tables:
        raise ValueError("no feature tables to merge")
    first = tables[0]
    for t in tables[1:]:
        if t.participant_ids != first.participant_ids:
            ours, theirs = set(first.participant_ids), set(t.participant_ids)
            missing = sorted((ours | theirs) - (ours & theirs))
            if missing:
                raise MissingParticipantError(missing[0], "merged feature tables")
            raise ValueError("participant order differs between feature tables")
    return FeatureTable(
        participant_ids=first.participant_ids,
        feature_names=tuple(n for t in tables for n in t.feature_names),
        modalities=tuple(m for t in tables for m in t.modalities),
        values=np.hstack([t.values for t in tables]),
    )


@dataclass(frozen=True, eq=False)
class LabelVector:
    """One real-valued label (factor score) per participant."""

    participant_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        pids = tuple(self.participant_ids)
        if values.ndim != 1 or values.size != len(pids):
            raise ValueError("values must be a vector matching participant_ids")
        if len(set(pids)) != len(pids):
            raise ValueError("participant ids must be unique")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError("labels must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "participant_ids", pids)

    def standardized(self) -> "LabelVector":
        return LabelVector(self.participant_ids, zscore(self.values))

    def is_standardized(self, tol: float = 1e-9) -> bool:
        return abs(self.values.mean()) <= tol and abs(self.values.std() - 1.0) <= tol


@dataclass(frozen=True)
class GroupAssignment:
    """Mapping from participant id to interaction-group id.

    Every participant belongs to exactly one group and all groups have the
    declared size (three for triadic interaction data).
    """

    mapping: dict[str, str]
    group_size: int = 3

    def __post_init__(self):
        sizes: dict[str, int] = {}
        for gid in self.mapping.values():
            sizes[gid] = sizes.get(gid, 0) + 1
        bad = {g: s for g, s in sizes.items() if s != self.group_size}
        if bad:
            raise ValueError(
                f"groups with size != {self.group_size}: {sorted(bad.items())}"
            )
        object.__setattr__(self, "mapping", dict(self.mapping))

    @property
    def group_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for gid in self.mapping.values():
            seen.setdefault(gid)
        return tuple(seen)

    def members(self, group_id: str) -> tuple[str, ...]:
        return tuple(p for p, g in self.mapping.items() if g == group_id)

    def group_of(self, participant_id: str) -> str:
        return self.mapping[participant_id]


@dataclass(frozen=True, eq=False)
class TraitTable:
    """Self-reported trait scores per participant (one column per trait)."""

    participant_ids: tuple[str, ...]
    trait_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        pids = tuple(self.participant_ids)
        names = tuple(self.trait_names)
        if values.shape != (len(pids), len(names)):
            raise ValueError("values shape does not match ids/names")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError("trait scores must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "participant_ids", pids)
        object.__setattr__(self, "trait_names", names)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.trait_names.index(name)]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Aligned features, labels, and group structure for one study."""

    features: FeatureTable
    labels: LabelVector
    groups: GroupAssignment
    traits: TraitTable | None = None

    def __post_init__(self):
        pids = self.features.participant_ids
        if self.labels.participant_ids != pids:
            _raise_participant_mismatch(pids, self.labels.participant_ids, "labels")
        group_pids = set(self.groups.mapping)
        for p in pids:
            if p not in group_pids:
                raise MissingParticipantError(p, "groups")
        for p in sorted(group_pids - set(pids)):
            raise MissingParticipantError(p, "features")
        if self.traits is not None and self.traits.participant_ids != pids:
            _raise_participant_mismatch(pids, self.traits.participant_ids, "traits")

    @property
    def participant_ids(self) -> tuple[str, ...]:
        return self.features.participant_ids


def _raise_participant_mismatch(reference, other, where):
    ref_set, other_set = set(reference), set(other)
    for p in reference:
        if p not in other_set:
            raise MissingParticipantError(p, where)
    for p in other:
        if p not in ref_set:
            raise MissingParticipantError(p, "features")
    raise ValueError(f"participant order differs between features and {where}")


# ---------------------------------------------------------------------------
# CSV / manifest I/O
#
# Manifest: JSON object with keys "features" (path or list of paths),
# "labels", "groups", optional "traits" and "group_size". Paths are
# resolved relative to the manifest file.
# ---------------------------------------------------------------------------


def _read_csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc
    if not rows:
        raise ParseError("empty file", path=str(path), line=1)
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _parse_float(cell: str, path: Path, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError as exc:
        raise ParseError(
            f"cannot parse {cell!r} in column {column!r} as a number",
            path=str(path),
            line=line,
        ) from exc
    if not np.isfinite(value):
        raise NonFiniteValueError(
            f"non-finite value {cell!r} at {path}:{line}, column {column!r}",
            row=line,
            column=column,
        )
    return value


def load_feature_table(path) -> FeatureTable:
    """Read a features CSV with ``modality:name`` column headers."""
    path = Path(path)
    header, rows = _read_csv_rows(path)
    if not header or header[0] != "participant_id":
        raise ParseError(
            "first column must be 'participant_id'", path=str(path), line=1
        )
    names, mods = [], []
    for col in header[1:]:
        tag, sep, name = col.partition(":")
        if not sep or tag not in MODALITIES or not name:
            raise ParseError(
                f"feature column {col!r} must look like 'visual:<name>' or "
                "'linguistic:<name>'",
                path=str(path),
                line=1,
            )
        names.append(name)
        mods.append(tag)
    pids, values = [], []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, got {len(row)}",
                path=str(path),
                line=i,
            )
        pids.append(row[0])
        values.append(
            [_parse_float(c, path, i, names[j]) for j, c in enumerate(row[1:])]
        )
    return FeatureTable(tuple(pids), tuple(names), tuple(mods), np.array(values))


def save_feature_table(table: FeatureTable, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["participant_id"]
            + [f"{m}:{n}" for m, n in zip(table.modalities, table.feature_names)]
        )
        for pid, row in zip(table.participant_ids, table.values):
            writer.writerow([pid] + [repr(float(v)) for v in row])


def load_labels(path) -> LabelVector:
    path = Path(path)
    header, rows = _read_csv_rows(path)
    if header != ["participant_id", "label"]:
        raise ParseError(
            "labels header must be 'participant_id,label'", path=str(path), line=1
        )
    pids, values = [], []
    for i, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise ParseError("expected 2 cells", path=str(path), line=i)
        pids.append(row[0])
        values.append(_parse_float(row[1], path, i, "label"))
    return LabelVector(tuple(pids), np.array(values))


def save_labels(labels: LabelVector, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "label"])
        for pid, v in zip(labels.participant_ids, labels.values):
            writer.writerow([pid, repr(float(v))])


def load_groups(path, group_size: int | None = None) -> GroupAssignment:
    path = Path(path)
    header, rows = _read_csv_rows(path)
    if header != ["participant_id", "group_id"]:
        raise ParseError(
            "groups header must be 'participant_id,group_id'", path=str(path), line=1
        )
    mapping: dict[str, str] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != 2:
            raise ParseError("expected 2 cells", path=str(path), line=i)
        if row[0] in mapping:
            raise ParseError(
                f"participant {row[0]!r} listed twice", path=str(path), line=i
            )
        mapping[row[0]] = row[1]
    if group_size is None:
        sizes = {gid: 0 for gid in mapping.values()}
        for gid in mapping.values():
            sizes[gid] += 1
        uniq = set(sizes.values())
        if len(uniq) != 1:
            raise ParseError(
                f"groups have unequal sizes {sorted(uniq)}; declare group_size",
                path=str(path),
            )
        group_size = uniq.pop()
    return GroupAssignment(mapping, group_size=group_size)


def save_groups(groups: GroupAssignment, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "group_id"])
        for pid, gid in groups.mapping.items():
            writer.writerow([pid, gid])


def load_traits(path) -> TraitTable:
    path = Path(path)
    header, rows = _read_csv_rows(path)
    if not header or header[0] != "participant_id" or len(header) < 2:
        raise ParseError(
            "traits header must be 'participant_id,<trait>,...'",
            path=str(path),
            line=1,
        )
    names = tuple(header[1:])
    pids, values = [], []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, got {len(row)}",
                path=str(path),
                line=i,
            )
        pids.append(row[0])
        values.append(
            [_parse_float(c, path, i, names[j]) for j, c in enumerate(row[1:])]
        )
    return TraitTable(tuple(pids), names, np.array(values))


def save_traits(traits: TraitTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id"] + list(traits.trait_names))
        for pid, row in zip(traits.participant_ids, traits.values):
            writer.writerow([pid] + [repr(float(v)) for v in row])


def _align_to(reference: tuple[str, ...], pids: tuple[str, ...], where: str):
    """Index of each reference participant in pids; error on mismatch."""
    pos = {p: i for i, p in enumerate(pids)}
    idx = []
    for p in reference:
        if p not in pos:
            raise MissingParticipantError(p, where)
        idx.append(pos[p])
    for p in pids:
        if p not in set(reference):
            raise MissingParticipantError(p, "features")
    return idx


def load_dataset(manifest_path) -> Dataset:
    """Load a dataset from a JSON manifest referencing CSV files.

    All members are aligned to the feature table's participant order; a
    participant present in one file but not another raises
    MissingParticipantError naming the id.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest: {exc}", path=str(manifest_path)) from exc
    if not isinstance(manifest, dict):
        raise ParseError("manifest must be a JSON object", path=str(manifest_path))
    for key in ("features", "labels", "groups"):
        if key not in manifest:
            raise ParseError(f"manifest missing key {key!r}", path=str(manifest_path))
    base = manifest_path.parent

    feat_entry = manifest["features"]
    feat_paths = feat_entry if isinstance(feat_entry, list) else [feat_entry]
    tables = [load_feature_table(base / p) for p in feat_paths]
    if len(tables) > 1:
        # Merge expects identical order; re-align later tables to the first.
        ref = tables[0].participant_ids
        aligned = [tables[0]]
        for t in tables[1:]:
            idx = _align_to(ref, t.participant_ids, "merged feature tables")
            aligned.append(
                FeatureTable(ref, t.feature_names, t.modalities, t.values[idx])
            )
        features = merge_feature_tables(aligned)
    else:
        features = tables[0]

    labels = load_labels(base / manifest["labels"])
    idx = _align_to(features.participant_ids, labels.participant_ids, "labels")
    labels = LabelVector(features.participant_ids, labels.values[idx])

    groups = load_groups(base / manifest["groups"], manifest.get("group_size"))
    traits = None
    if manifest.get("traits"):
        raw = load_traits(base / manifest["traits"])
        idx = _align_to(features.participant_ids, raw.participant_ids, "traits")
        traits = TraitTable(
            features.participant_ids, raw.trait_names, raw.values[idx]
        )
    return Dataset(features=features, labels=labels, groups=groups, traits=traits)


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Write dataset CSVs plus a manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_feature_table(dataset.features, out_dir / "features.csv")
    save_labels(dataset.labels, out_dir / "labels.csv")
    save_groups(dataset.groups, out_dir / "groups.csv")
    manifest = {
        "features": "features.csv",
        "labels": "labels.csv",
        "groups": "groups.csv",
        "group_size": dataset.groups.group_size,
    }
    if dataset.traits is not None:
        save_traits(dataset.traits, out_dir / "traits.csv")
        manifest["traits"] = "traits.csv"
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_path
