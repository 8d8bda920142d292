"""Config-driven command-line pipeline.

Subcommands cover the full workflow: rating reliability, the latent-trait
model, feature extraction from tracking output and transcripts, the nested
cross-validation experiment, modality comparisons, coefficient reports,
and synthetic-data generation. Every subcommand reads one JSON config
(flags override it), validates all inputs before writing anything, and
emits deterministic artifacts: reruns with the same config and seed are
byte-identical except for the created-at field inside JSON metadata
blocks.

Exit codes: 0 success, 1 runtime failure (bad data, unreadable files),
2 usage error (unknown command, malformed flags, missing required config).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import load_dataset, load_traits, save_feature_table, save_labels
from .errors import ConfigError, ExpressivenessError, ParseError
from .evaluation import (
    ALGORITHMS,
    MODALITY_CHOICES,
    bootstrap_compare,
    coefficient_summary,
    elastic_net_grid,
    load_records,
    mlp_grid,
    nested_cv,
    save_records,
    summarize_records,
    svr_grid,
)
from .latent import (
    CfaConfig,
    external_validity,
    factor_scores,
    fit_cfa,
    fit_indices,
    sample_covariance,
)
from .linguistic import (
    DEMO_LEXICON,
    linguistic_feature_table,
    load_external_dimensions,
    load_lexicon,
    load_transcripts,
)
from .reliability import (
    icc_average_raters,
    load_ratings,
    pool_rating_matrices,
    rating_matrices,
)
from .synth import FeatureSpec, SynthConfig, generate_synthetic, save_synthetic
from .visual import parse_track, visual_feature_table
from .core import zscore

OUT_DIR_ENV = "EXPRESSIVENESS_OUT"


class UsageError(Exception):
    """Malformed invocation: missing required config keys or bad values."""


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str) -> object:
    if key not in cfg or cfg[key] in (None, ""):
        raise UsageError(f"config key {key!r} is required for this command")
    return cfg[key]


def _require_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        raise UsageError(
            "a seed is required for this command (--seed or config 'seed')"
        )
    return int(cfg["seed"])


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out") or os.environ.get(OUT_DIR_ENV) or "."
    return Path(out)


def _metadata(seed: int | None = None) -> dict:
    meta = {
        "created": datetime.now(timezone.utc).isoformat(),
        "tool": "expressiveness",
        "version": __version__,
    }
    if seed is not None:
        meta["seed"] = seed
    return meta


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _cmd_reliability(cfg: dict) -> int:
    ratings_path = _require(cfg, "ratings")
    score_range = (int(cfg.get("score_min", 0)), int(cfg.get("score_max", 4)))
    confidence = float(cfg.get("confidence", 0.95))
    by_question = load_ratings(ratings_path)

    questions = {}
    for qid in sorted(by_question):
        panels = rating_matrices(by_question[qid], qid, score_range)
        panel_entries = []
        for matrix in panels:
            estimate = icc_average_raters(matrix, confidence)
            panel_entries.append(
                {"rater_ids": list(matrix.rater_ids), **estimate.as_dict()}
            )
        pooled = icc_average_raters(pool_rating_matrices(panels), confidence)
        questions[qid] = {
            "panels": panel_entries,
            "pooled": pooled.as_dict(),
        }

    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "reliability.json", {
        "confidence": confidence,
        "questions": questions,
        "metadata": _metadata(),
    })
    return 0


def _load_indicators(path) -> tuple[tuple[str, ...], np.ndarray]:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(_csv.reader(fh))
    if not rows:
        raise ParseError("empty file", path=str(path), line=1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "participant_id" or len(header) < 3:
        raise ParseError(
            "indicators header must be 'participant_id,<q1>,<q2>,...'",
            path=str(path), line=1,
        )
    pids, values = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, got {len(row)}",
                path=str(path), line=i,
            )
        pids.append(row[0])
        try:
            values.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), path=str(path), line=i) from None
    return tuple(pids), np.asarray(values, dtype=float)


def _cmd_cfa(cfg: dict) -> int:
    seed = _require_seed(cfg)
    pids, raw = _load_indicators(_require(cfg, "indicators"))
    traits = load_traits(cfg["traits"]) if cfg.get("traits") else None

    standardized = np.column_stack([zscore(raw[:, j]) for j in range(raw.shape[1])])
    config = CfaConfig(
        n_chains=int(cfg.get("n_chains", 4)),
        n_warmup=int(cfg.get("n_warmup", 1000)),
        n_kept=int(cfg.get("n_kept", 1000)),
        seed=seed,
    )
    posterior = fit_cfa(standardized, config)
    indices = fit_indices(
        posterior, sample_covariance(standardized), standardized.shape[0]
    )
    scores = factor_scores(posterior, pids)
    validity = external_validity(scores, traits) if traits is not None else None

    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "cfa_posterior.json", {
        "parameters": posterior.summary(),
        "n_chains": config.n_chains,
        "n_kept": config.n_kept,
        "metadata": _metadata(seed),
    })
    _write_json(out / "cfa_fit.json", {
        **indices.as_dict(),
        "n_observations": standardized.shape[0],
        "metadata": _metadata(seed),
    })
    save_labels(scores, out / "factor_scores.csv")
    if validity is not None:
        _write_json(out / "external_validity.json", {
            "correlations": validity,
            "metadata": _metadata(seed),
        })
    return 0


def _cmd_features_visual(cfg: dict) -> int:
    tracks_dir = Path(_require(cfg, "tracks_dir"))
    if not tracks_dir.is_dir():
        raise ConfigError(f"tracks_dir {tracks_dir} is not a directory")
    paths = sorted(tracks_dir.glob("*.csv"))
    if not paths:
        raise ConfigError(f"no .csv track files in {tracks_dir}")
    tracks = {p.stem: parse_track(p) for p in paths}
    table = visual_feature_table(
        tracks,
        window=int(cfg.get("window", 5)),
        exclude_untracked=bool(cfg.get("exclude_untracked", False)),
    )
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_feature_table(table, out / "features_visual.csv")
    return 0


def _cmd_features_linguistic(cfg: dict) -> int:
    transcripts = load_transcripts(_require(cfg, "transcripts"))
    lexicon = load_lexicon(cfg["lexicon"]) if cfg.get("lexicon") else DEMO_LEXICON
    dims = (
        load_external_dimensions(cfg["external_dims"])
        if cfg.get("external_dims")
        else None
    )
    table = linguistic_feature_table(transcripts, lexicon, dims)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_feature_table(table, out / "features_linguistic.csv")
    return 0


_GRID_BUILDERS = {
    "elastic_net": (elastic_net_grid, ("alphas", "lambdas")),
    "svr": (svr_grid, ("c_values", "gamma_values")),
    "mlp": (mlp_grid, ("layer_counts", "unit_counts", "l2_alphas")),
}


def _grid_from_config(algorithm: str, overrides: dict | None):
    if not overrides or algorithm not in overrides:
        return None
    spec = overrides[algorithm]
    builder, known = _GRID_BUILDERS[algorithm]
    unknown = set(spec) - set(known)
    if unknown:
        raise ConfigError(
            f"unknown grid keys for {algorithm}: {sorted(unknown)}"
        )
    return builder(**{k: tuple(v) for k, v in spec.items()})


def _cmd_evaluate(cfg: dict) -> int:
    seed = _require_seed(cfg)
    dataset = load_dataset(_require(cfg, "manifest"))
    algorithms = cfg.get("algorithms", ["elastic_net"])
    modalities = cfg.get("modalities", list(MODALITY_CHOICES))
    for algorithm in algorithms:
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
    for modality in modalities:
        if modality not in MODALITY_CHOICES:
            raise ConfigError(f"unknown modality {modality!r}")
    if not dataset.labels.is_standardized():
        dataset = type(dataset)(
            features=dataset.features,
            labels=dataset.labels.standardized(),
            groups=dataset.groups,
            traits=dataset.traits,
        )

    records = []
    for algorithm in algorithms:
        grid = _grid_from_config(algorithm, cfg.get("grid"))
        for modality in modalities:
            records.extend(nested_cv(
                dataset,
                algorithm,
                modality,
                grid=grid,
                n_reps=int(cfg.get("n_reps", 20)),
                k_outer=int(cfg.get("k_outer", 8)),
                k_inner=int(cfg.get("k_inner", 7)),
                seed=seed,
                n_jobs=int(cfg.get("jobs", 1)),
            ))

    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_records(records, out)
    _write_json(out / "summary.json", {
        "medians": summarize_records(records),
        "n_reps": int(cfg.get("n_reps", 20)),
        "metadata": _metadata(seed),
    })
    return 0


def _cmd_compare(cfg: dict) -> int:
    seed = _require_seed(cfg)
    records = load_records(_require(cfg, "records"))
    algorithm = cfg.get("algorithm")
    if algorithm is not None:
        records = [r for r in records if r.algorithm == algorithm]
    if not records:
        raise ConfigError("no records match the requested algorithm")
    metrics_wanted = cfg.get("metrics", ["rmse", "r2", "r"])
    by_modality: dict[str, list] = {}
    for rec in records:
        by_modality.setdefault(rec.modality, []).append(rec)
    pairs = cfg.get("pairs")
    if pairs is None:
        present = sorted(by_modality)
        pairs = [
            [a, b] for i, a in enumerate(present) for b in present[i + 1:]
        ]
    comparisons = []
    index = 0
    for metric in metrics_wanted:
        for a, b in pairs:
            if a not in by_modality or b not in by_modality:
                raise ConfigError(f"no records for modality pair {a!r}, {b!r}")
            result = bootstrap_compare(
                by_modality[a],
                by_modality[b],
                metric=metric,
                n_resamples=int(cfg.get("n_resamples", 2000)),
                seed=int(
                    np.random.SeedSequence([seed, index]).generate_state(1)[0]
                ),
                label_a=a,
                label_b=b,
            )
            comparisons.append(result.as_dict())
            index += 1

    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "comparison.json", {
        "comparisons": comparisons,
        "n_resamples": int(cfg.get("n_resamples", 2000)),
        "metadata": _metadata(seed),
    })
    return 0


def _cmd_coefficients(cfg: dict) -> int:
    records = load_records(_require(cfg, "records"), with_models=True)
    algorithm = cfg.get("algorithm", "elastic_net")
    modality = cfg.get("modality", "multimodal")
    subset = [
        r for r in records
        if r.algorithm == algorithm and r.modality == modality
    ]
    if not subset:
        raise ConfigError(
            f"no records for algorithm {algorithm!r}, modality {modality!r}"
        )
    entries = coefficient_summary(subset)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "coefficients.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("feature,median,q1,q3,nonzero_median\n")
        for e in entries:
            fh.write(
                f"{e.feature},{e.median!r},{e.q1!r},{e.q3!r},"
                f"{str(e.nonzero_median).lower()}\n"
            )
    return 0


def _cmd_synth(cfg: dict) -> int:
    seed = _require_seed(cfg)
    kwargs = {}
    for key in ("n_groups", "group_size", "n_raters"):
        if key in cfg:
            kwargs[key] = int(cfg[key])
    if "rater_noise_sd" in cfg:
        kwargs["rater_noise_sd"] = float(cfg["rater_noise_sd"])
    if "loadings" in cfg:
        kwargs["loadings"] = tuple(float(v) for v in cfg["loadings"])
    if "residual_variances" in cfg:
        kwargs["residual_variances"] = tuple(
            float(v) for v in cfg["residual_variances"]
        )
    if "features" in cfg:
        kwargs["features"] = tuple(
            FeatureSpec(
                name=spec["name"],
                modality=spec["modality"],
                coef=float(spec.get("coef", 0.0)),
                noise_sd=float(spec.get("noise_sd", 1.0)),
            )
            for spec in cfg["features"]
        )
    if "trait_coefs" in cfg:
        kwargs["trait_coefs"] = {
            k: float(v) for k, v in cfg["trait_coefs"].items()
        }
    config = SynthConfig(**kwargs)
    data = generate_synthetic(config, seed)
    save_synthetic(data, _out_dir(cfg))
    return 0


_COMMANDS = {
    "reliability": _cmd_reliability,
    "cfa": _cmd_cfa,
    "features-visual": _cmd_features_visual,
    "features-linguistic": _cmd_features_linguistic,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "coefficients": _cmd_coefficients,
    "synth": _cmd_synth,
}

_HELP = {
    "reliability": "inter-rater agreement per question (per panel and pooled)",
    "cfa": "one-factor latent model: posterior, fit indices, factor scores",
    "features-visual": "20 visual signals from face-tracking CSVs",
    "features-linguistic": "word-count and category signals from transcripts",
    "evaluate": "nested cross-validation over algorithms and modalities",
    "compare": "bootstrap modality comparison from saved records",
    "coefficients": "coefficient distributions of tuned linear models",
    "synth": "generate a synthetic dataset with known ground truth",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expressiveness",
        description="Behavioral-signal analysis pipeline.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in _COMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--jobs", type=int, help="parallel worker count")
        p.add_argument(
            "--out",
            help=f"output directory (default: ${OUT_DIR_ENV} or '.')",
        )
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        for key in ("seed", "jobs", "out"):
            value = getattr(args, key)
            if value is not None:
                cfg[key] = value
        return args.handler(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ExpressivenessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
