"""Group-stratified nested cross-validation harness and analyses.

The experiment design: groups (not participants) are the assignment unit
so groupmates never straddle a train/test boundary; folds are stratified
to keep label quartiles balanced; hyperparameters are tuned on inner
validation folds by mean RMSE and the winner refit on the full outer
training set. Repetitions reshuffle the folds, and within a repetition
the fold structure depends only on (master seed, repetition index), so
every algorithm and modality sees identical splits. All randomness flows
through seeds derived from the unit indices, which makes results
bit-identical across reruns at any parallelism degree.

Downstream analyses: percentile-bootstrap comparison of paired fold-level
metric differences, per-feature coefficient distributions over the tuned
linear models, and median-metric summaries.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .core import Dataset, GroupAssignment, LabelVector, quartile_bins
from .errors import (
    DegenerateInputError,
    LengthMismatchError,
    MissingParticipantError,
    MixedFeatureSetsError,
    TooFewGroupsError,
    TooShortError,
    UnpairedRecordsError,
)
from .models import (
    ElasticNetParams,
    MlpParams,
    SvrParams,
    TrainedModel,
    fit_elastic_net,
    fit_mlp,
    fit_svr,
    load_model,
    save_model,
)

ALGORITHMS = ("elastic_net", "svr", "mlp")
MODALITY_CHOICES = ("visual", "linguistic", "multimodal")
METRIC_NAMES = ("rmse", "r2", "r")

ELASTIC_NET_ALPHAS = (0.01, 0.05, 0.1, 0.5, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
ELASTIC_NET_LAMBDAS = (0.0, 0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0)
SVR_C_VALUES = tuple(2.0**k for k in range(-5, 16))
SVR_GAMMA_VALUES = tuple(2.0**k for k in range(-15, 4))
MLP_LAYER_COUNTS = (1, 2)
MLP_UNIT_COUNTS = (64, 128)
MLP_L2_ALPHAS = (
    0.0001, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5,
    1.7, 1.9, 2.0, 3.0, 4.0, 5.0,
)


def elastic_net_grid(
    alphas=ELASTIC_NET_ALPHAS, lambdas=ELASTIC_NET_LAMBDAS
) -> tuple[ElasticNetParams, ...]:
    """Full grid, ordered so ties resolve toward stronger regularization."""
    return tuple(
        ElasticNetParams(alpha=a, lam=l)
        for a in sorted(alphas, reverse=True)
        for l in sorted(lambdas, reverse=True)
    )


def svr_grid(
    c_values=SVR_C_VALUES, gamma_values=SVR_GAMMA_VALUES
) -> tuple[SvrParams, ...]:
    """Ordered small-C, small-gamma first (stronger regularization wins ties)."""
    return tuple(
        SvrParams(C=c, gamma=g)
        for c in sorted(c_values)
        for g in sorted(gamma_values)
    )


def mlp_grid(
    layer_counts=MLP_LAYER_COUNTS,
    unit_counts=MLP_UNIT_COUNTS,
    l2_alphas=MLP_L2_ALPHAS,
) -> tuple[MlpParams, ...]:
    """Ordered strongest penalty and smallest architecture first."""
    return tuple(
        MlpParams(hidden=(units,) * layers, l2_alpha=a)
        for a in sorted(l2_alphas, reverse=True)
        for layers in sorted(layer_counts)
        for units in sorted(unit_counts)
    )


def default_grid(algorithm: str):
    if algorithm == "elastic_net":
        return elastic_net_grid()
    if algorithm == "svr":
        return svr_grid()
    if algorithm == "mlp":
        return mlp_grid()
    raise ValueError(f"unknown algorithm {algorithm!r}")


def hyperparameters_of(params) -> dict:
    """The tuned settings of one grid point, JSON-shaped."""
    if isinstance(params, ElasticNetParams):
        return {"alpha": params.alpha, "lambda": params.lam}
    if isinstance(params, SvrParams):
        return {"C": params.C, "gamma": params.gamma, "epsilon": params.epsilon}
    if isinstance(params, MlpParams):
        return {
            "hidden": list(params.hidden),
            "l2_alpha": params.l2_alpha,
        }
    raise TypeError(f"unknown params type {type(params).__name__}")


@dataclass(frozen=True)
class FoldAssignment:
    """Participant-level fold indices for one repetition.

    outer maps every participant to a fold in 0..k_outer-1; inner[f] maps
    each participant outside fold f to a validation fold in 0..k_inner-1.
    """

    repetition: int
    k_outer: int
    k_inner: int
    outer: dict[str, int]
    inner: tuple[dict[str, int], ...]

    def __post_init__(self):
        if len(self.inner) != self.k_outer:
            raise ValueError("need one inner assignment per outer fold")
        folds = set(self.outer.values())
        if not folds <= set(range(self.k_outer)):
            raise ValueError("outer fold index out of range")
        for f, mapping in enumerate(self.inner):
            expected = {p for p, of in self.outer.items() if of != f}
            if set(mapping) != expected:
                raise ValueError(
                    f"inner assignment {f} must cover exactly the participants "
                    f"outside outer fold {f}"
                )
            if not set(mapping.values()) <= set(range(self.k_inner)):
                raise ValueError("inner fold index out of range")

    def check_group_integrity(self, groups: GroupAssignment) -> None:
        """Raise if any group straddles a fold boundary."""
        for gid in groups.group_ids:
            members = groups.members(gid)
            if len({self.outer[p] for p in members}) != 1:
                raise ValueError(f"group {gid!r} split across outer folds")
            for mapping in self.inner:
                got = {mapping[p] for p in members if p in mapping}
                if len(got) > 1:
                    raise ValueError(f"group {gid!r} split across inner folds")


def _stratified_deal(group_ids, mean_of, k: int, rng) -> dict[str, int]:
    """Shuffle groups within each label quartile, deal round-robin.

    Quartile runs are contiguous in the dealt sequence, so every fold
    receives within one of each quartile's share; the running cursor keeps
    total fold sizes within one as well.
    """
    means = np.array([mean_of[g] for g in group_ids])
    if len(group_ids) >= 4:
        bins = quartile_bins(means)
    else:
        bins = np.zeros(len(group_ids), dtype=int)
    queue = []
    for b in sorted(set(bins.tolist())):
        members = [i for i, v in enumerate(bins) if v == b]
        rng.shuffle(members)
        queue.extend(members)
    return {group_ids[i]: pos % k for pos, i in enumerate(queue)}


def make_folds(
    labels: LabelVector,
    groups: GroupAssignment,
    k_outer: int = 8,
    k_inner: int = 7,
    seed: int = 0,
    repetition: int = 0,
) -> FoldAssignment:
    """Group-stratified outer and inner fold assignment.

    The RNG is derived from (seed, repetition) alone, so the assignment is
    identical for every algorithm and modality evaluated under the same
    master seed and repetition.
    """
    if k_outer < 2 or k_inner < 2:
        raise ValueError("k_outer and k_inner must be >= 2")
    gids = groups.group_ids
    if len(gids) < k_outer:
        raise TooFewGroupsError(
            f"need at least {k_outer} groups for {k_outer} outer folds, "
            f"got {len(gids)}"
        )
    label_of = dict(zip(labels.participant_ids, labels.values))
    for gid in gids:
        for member in groups.members(gid):
            if member not in label_of:
                raise MissingParticipantError(member, "labels")
    mean_of = {
        gid: float(np.mean([label_of[m] for m in groups.members(gid)]))
        for gid in gids
    }

    root = np.random.SeedSequence([int(seed), int(repetition)])
    streams = root.spawn(1 + k_outer)
    outer_of_group = _stratified_deal(
        gids, mean_of, k_outer, np.random.default_rng(streams[0])
    )
    inner_maps = []
    for f in range(k_outer):
        rem = tuple(g for g in gids if outer_of_group[g] != f)
        if len(rem) < k_inner:
            raise TooFewGroupsError(
                f"only {len(rem)} groups remain outside outer fold {f}; "
                f"need {k_inner}"
            )
        inner_of_group = _stratified_deal(
            rem, mean_of, k_inner, np.random.default_rng(streams[1 + f])
        )
        inner_maps.append({
            p: inner_of_group[g] for g in rem for p in groups.members(g)
        })
    outer = {
        p: outer_of_group[g] for g in gids for p in groups.members(g)
    }
    return FoldAssignment(
        repetition=repetition,
        k_outer=k_outer,
        k_inner=k_inner,
        outer=outer,
        inner=tuple(inner_maps),
    )


@dataclass(frozen=True)
class Metrics:
    """Test-set scores; r is None when a prediction vector is constant."""

    rmse: float
    r2: float
    r: float | None

    def __iter__(self):
        return iter((self.rmse, self.r2, self.r))


def metrics(y, y_hat) -> Metrics:
    """RMSE, coefficient of determination, and Pearson correlation."""
    yv = np.asarray(y, dtype=float).ravel()
    hv = np.asarray(y_hat, dtype=float).ravel()
    if yv.shape != hv.shape:
        raise LengthMismatchError(
            f"y has length {yv.shape[0]}, y_hat {hv.shape[0]}"
        )
    if yv.shape[0] < 2:
        raise TooShortError("need at least 2 values")
    resid = yv - hv
    rmse = float(np.sqrt(np.mean(resid**2)))
    if np.ptp(yv) == 0:
        raise DegenerateInputError("y is constant; R^2 undefined")
    sst = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst
    if np.ptp(hv) == 0 or np.ptp(yv) == 0:
        r = None
    else:
        r = float(np.corrcoef(yv, hv)[0, 1])
    return Metrics(rmse=rmse, r2=r2, r=r)


@dataclass(frozen=True, eq=False)
class EvaluationRecord:
    """One outer-fold result: tuned settings, test metrics, fitted model."""

    repetition: int
    outer_fold: int
    algorithm: str
    modality: str
    params: dict
    rmse: float
    r2: float
    r: float | None
    model: TrainedModel | None = None
    model_ref: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.modality not in MODALITY_CHOICES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if not (np.isfinite(self.rmse) and np.isfinite(self.r2)):
            raise ValueError("rmse and r2 must be finite")
        if self.r is not None and not np.isfinite(self.r):
            raise ValueError("r must be finite or None")


def _fit_seed(master: int, repetition: int, fold: int, grid_idx: int,
              part: int) -> int:
    """Stable per-fit seed from the unit indices."""
    ss = np.random.SeedSequence(
        [int(master), int(repetition), int(fold), int(grid_idx), int(part)]
    )
    return int(ss.generate_state(1)[0])


def _fit_one(algorithm, params, X, y, feature_names, seed, init_coef=None):
    if algorithm == "elastic_net":
        return fit_elastic_net(X, y, params, feature_names, init_coef=init_coef)
    if algorithm == "svr":
        return fit_svr(X, y, params, feature_names)
    return fit_mlp(X, y, replace(params, seed=seed), feature_names)


def _evaluate_fold(
    algorithm, X, y, feature_names, grid, train_idx, test_idx,
    inner_fold_of_train, k_inner, master_seed, repetition, fold, modality,
):
    """Inner grid search, winner refit, outer-test metrics for one fold."""
    x_train, y_train = X[train_idx], y[train_idx]
    mean_rmse = np.full(len(grid), np.inf)
    per_fold_rmse = np.full((len(grid), k_inner), np.nan)
    for v in range(k_inner):
        tr = inner_fold_of_train != v
        va = ~tr
        if not va.any() or tr.sum() < 2:
            continue
        init = None
        for gi, params in enumerate(grid):
            model = _fit_one(
                algorithm, params, x_train[tr], y_train[tr], feature_names,
                _fit_seed(master_seed, repetition, fold, gi, v),
                init_coef=init,
            )
            if algorithm == "elastic_net":
                init = np.asarray(model.params["coef"], dtype=float)
            pred = model.predict(x_train[va])
            per_fold_rmse[gi, v] = float(
                np.sqrt(np.mean((y_train[va] - pred) ** 2))
            )
    valid = ~np.isnan(per_fold_rmse)
    for gi in range(len(grid)):
        if valid[gi].any():
            mean_rmse[gi] = float(per_fold_rmse[gi, valid[gi]].mean())
    best_gi = int(np.argmin(mean_rmse))  # earliest wins ties: stronger reg
    if not np.isfinite(mean_rmse[best_gi]):
        raise DegenerateInputError("no inner validation fold produced a score")

    winner = grid[best_gi]
    model = _fit_one(
        algorithm, winner, x_train, y_train, feature_names,
        _fit_seed(master_seed, repetition, fold, best_gi, k_inner),
    )
    scores = metrics(y[test_idx], model.predict(X[test_idx]))
    return EvaluationRecord(
        repetition=repetition,
        outer_fold=fold,
        algorithm=algorithm,
        modality=modality,
        params=hyperparameters_of(winner),
        rmse=scores.rmse,
        r2=scores.r2,
        r=scores.r,
        model=model,
    )


def nested_cv(
    dataset: Dataset,
    algorithm: str,
    modality: str,
    grid=None,
    n_reps: int = 20,
    k_outer: int = 8,
    k_inner: int = 7,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[EvaluationRecord]:
    """Repeated group-stratified nested cross-validation.

    Returns n_reps * k_outer records ordered by (repetition, fold). The
    fold structure for a repetition is a function of (seed, repetition)
    only; per-fit seeds additionally hash the fold and grid indices.
    Output is bit-identical across reruns for any n_jobs.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if modality not in MODALITY_CHOICES:
        raise ValueError(f"unknown modality {modality!r}")
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    features = dataset.features
    if modality != "multimodal":
        features = features.select_modality(modality)
    if grid is None:
        grid = default_grid(algorithm)
    grid = tuple(grid)
    if not grid:
        raise ValueError("hyperparameter grid is empty")

    ids = features.participant_ids
    pos = {p: i for i, p in enumerate(ids)}
    X = np.asarray(features.values, dtype=float)
    label_of = dict(zip(dataset.labels.participant_ids, dataset.labels.values))
    y = np.array([label_of[p] for p in ids])

    folds = [
        make_folds(dataset.labels, dataset.groups, k_outer, k_inner,
                   seed=seed, repetition=rep)
        for rep in range(n_reps)
    ]

    units = []
    for rep in range(n_reps):
        assignment = folds[rep]
        for f in range(k_outer):
            train_idx = np.array(
                [pos[p] for p in ids if assignment.outer[p] != f], dtype=int
            )
            test_idx = np.array(
                [pos[p] for p in ids if assignment.outer[p] == f], dtype=int
            )
            inner_map = assignment.inner[f]
            inner_fold_of_train = np.array(
                [inner_map[ids[i]] for i in train_idx], dtype=int
            )
            units.append((rep, f, train_idx, test_idx, inner_fold_of_train))

    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_fold)(
            algorithm, X, y, features.feature_names, grid, train_idx,
            test_idx, inner_fold_of_train, k_inner, seed, rep, f, modality,
        )
        for rep, f, train_idx, test_idx, inner_fold_of_train in units
    )
    return list(results)


@dataclass(frozen=True)
class ComparisonResult:
    """Percentile-bootstrap comparison of paired fold-level differences."""

    metric: str
    pair: str
    delta: float
    ci_low: float
    ci_high: float
    p_value: float
    n_pairs: int

    def __post_init__(self):
        if not self.ci_low <= self.delta <= self.ci_high:
            raise ValueError("median difference must lie inside its CI")
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError("p-value must lie in (0, 1]")

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "pair": self.pair,
            "delta": self.delta,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_value": self.p_value,
            "n_pairs": self.n_pairs,
        }


def bootstrap_compare(
    records_a,
    records_b,
    metric: str = "rmse",
    n_resamples: int = 2000,
    seed: int = 0,
    label_a: str | None = None,
    label_b: str | None = None,
) -> ComparisonResult:
    """Median paired difference (a - b) with a percentile bootstrap.

    Records pair by (repetition, outer_fold). Resampling protocol, relied
    on by the dual-implementation test: rng = default_rng(seed), then per
    resample one call rng.integers(0, n, size=n) indexes the difference
    vector and its median is taken; the CI is the 2.5/97.5 percentile of
    the resample medians; two-sided p doubles the smaller tail fraction,
    floored at 1/n_resamples and capped at 1. Pairs where the metric is
    undefined (constant predictions) are dropped.
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"metric must be one of {METRIC_NAMES}")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")

    def keyed(records, which):
        out = {}
        for rec in records:
            key = (rec.repetition, rec.outer_fold)
            if key in out:
                raise UnpairedRecordsError(
                    f"duplicate (repetition, fold) {key} in records_{which}"
                )
            out[key] = rec
        return out

    by_a, by_b = keyed(records_a, "a"), keyed(records_b, "b")
    if set(by_a) != set(by_b):
        raise UnpairedRecordsError(
            "records do not pair up by (repetition, fold)"
        )
    if not by_a:
        raise UnpairedRecordsError("no records to compare")

    diffs = []
    for key in sorted(by_a):
        va = getattr(by_a[key], metric)
        vb = getattr(by_b[key], metric)
        if va is None or vb is None:
            continue
        diffs.append(va - vb)
    if not diffs:
        raise DegenerateInputError(
            f"metric {metric!r} undefined for every pair"
        )
    d = np.asarray(diffs, dtype=float)
    n = len(d)

    rng = np.random.default_rng(seed)
    meds = np.empty(n_resamples)
    for b in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        meds[b] = np.median(d[idx])
    ci_low, ci_high = np.percentile(meds, [2.5, 97.5])
    p = 2.0 * min(float(np.mean(meds <= 0)), float(np.mean(meds >= 0)))
    p = min(max(p, 1.0 / n_resamples), 1.0)

    if label_a is None:
        label_a = _uniform_label(records_a)
    if label_b is None:
        label_b = _uniform_label(records_b)
    return ComparisonResult(
        metric=metric,
        pair=f"{label_a} - {label_b}",
        delta=float(np.median(d)),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        p_value=p,
        n_pairs=n,
    )


def _uniform_label(records) -> str:
    modalities = {rec.modality for rec in records}
    if len(modalities) == 1:
        return next(iter(modalities))
    algorithms = {rec.algorithm for rec in records}
    if len(algorithms) == 1:
        return next(iter(algorithms))
    return "records"


@dataclass(frozen=True)
class FeatureCoefficient:
    """Distribution summary of one feature's coefficient across models."""

    feature: str
    median: float
    q1: float
    q3: float
    nonzero_median: bool


def coefficient_summary(records) -> tuple[FeatureCoefficient, ...]:
    """Coefficient distributions over tuned linear models.

    Accepts elastic-net records only; every model must carry the same
    feature names. Returns one entry per feature, ordered by |median|
    descending (ties by name), with features whose median is exactly 0
    flagged nonzero_median=False.
    """
    records = list(records)
    if not records:
        raise MixedFeatureSetsError("no records given")
    for rec in records:
        if rec.model is None:
            raise ValueError("records must carry their fitted models")
        if rec.model.kind != "elastic_net":
            raise ValueError(
                "coefficient summary requires linear (elastic_net) models"
            )
    names = records[0].model.feature_names
    for rec in records:
        if rec.model.feature_names != names:
            raise MixedFeatureSetsError(
                "records carry differing feature name sets"
            )
    coefs = np.array(
        [np.asarray(rec.model.params["coef"], dtype=float) for rec in records]
    )
    entries = []
    for j, name in enumerate(names):
        col = coefs[:, j]
        q1, med, q3 = np.percentile(col, [25, 50, 75])
        entries.append(FeatureCoefficient(
            feature=name,
            median=float(med),
            q1=float(q1),
            q3=float(q3),
            nonzero_median=bool(med != 0.0),
        ))
    entries.sort(key=lambda e: (-abs(e.median), e.feature))
    return tuple(entries)


def summarize_records(records) -> dict:
    """Median of each metric per (algorithm, modality) cell."""
    groups: dict[tuple[str, str], list[EvaluationRecord]] = {}
    for rec in records:
        groups.setdefault((rec.algorithm, rec.modality), []).append(rec)
    out: dict[str, dict] = {}
    for (algorithm, modality), recs in sorted(groups.items()):
        rs = [rec.r for rec in recs if rec.r is not None]
        out.setdefault(algorithm, {})[modality] = {
            "rmse_median": float(np.median([rec.rmse for rec in recs])),
            "r2_median": float(np.median([rec.r2 for rec in recs])),
            "r_median": float(np.median(rs)) if rs else None,
            "n_records": len(recs),
            "n_r_undefined": sum(1 for rec in recs if rec.r is None),
        }
    return out


_RECORD_COLUMNS = (
    "repetition", "outer_fold", "algorithm", "modality", "params",
    "rmse", "r2", "r", "model_ref",
)


def save_records(records, out_dir, save_models: bool = True) -> Path:
    """Write records.csv plus one model JSON per record under models/."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in records:
        ref = ""
        if save_models and rec.model is not None:
            ref = (
                f"models/{rec.algorithm}_{rec.modality}"
                f"_rep{rec.repetition:02d}_fold{rec.outer_fold}.json"
            )
            (out / "models").mkdir(exist_ok=True)
            save_model(rec.model, out / ref)
        rows.append([
            rec.repetition, rec.outer_fold, rec.algorithm, rec.modality,
            json.dumps(rec.params, sort_keys=True),
            repr(float(rec.rmse)), repr(float(rec.r2)),
            "" if rec.r is None else repr(float(rec.r)),
            ref,
        ])
    path = out / "records.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORD_COLUMNS)
        writer.writerows(rows)
    return path


def load_records(path, with_models: bool = False) -> list[EvaluationRecord]:
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _RECORD_COLUMNS:
            raise ValueError(
                f"unexpected records header in {path}: {reader.fieldnames}"
            )
        for row in reader:
            model = None
            ref = row["model_ref"] or None
            if with_models and ref:
                model = load_model(path.parent / ref)
            records.append(EvaluationRecord(
                repetition=int(row["repetition"]),
                outer_fold=int(row["outer_fold"]),
                algorithm=row["algorithm"],
                modality=row["modality"],
                params=json.loads(row["params"]),
                rmse=float(row["rmse"]),
                r2=float(row["r2"]),
                r=float(row["r"]) if row["r"] else None,
                model=model,
                model_ref=ref,
            ))
    return records
