"""Inter-rater reliability of averaged ratings.

Implements the two-way random-effects, absolute-agreement, average-measures
intraclass correlation (the ICC(A,k) of McGraw & Wong, 1996), with
F-distribution confidence intervals from the same source. The estimator
asks: how reliable is the *average* of k raters' scores as a measurement of
each subject?
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import f as f_dist

from .core import RatingMatrix
from .errors import DegenerateRatingsError, OutOfRangeError, ParseError

BANDS = ("poor", "moderate", "good", "excellent")


@dataclass(frozen=True)
class IccEstimate:
    """Average-measures agreement ICC with its ANOVA mean squares and CI."""

    icc: float
    n_subjects: int
    n_raters: int
    msr: float  # between-subject (rows)
    msc: float  # between-rater (columns)
    mse: float  # residual
    ci_low: float
    ci_high: float
    confidence: float = 0.95

    def as_dict(self) -> dict:
        return {
            "icc": float(self.icc),
            "ci_low": float(self.ci_low),
            "ci_high": float(self.ci_high),
            "band": interpret_icc(self.icc),
            "n": self.n_subjects,
            "k": self.n_raters,
        }


def _mean_squares(scores: np.ndarray) -> tuple[float, float, float]:
    """Two-way ANOVA decomposition into (MSR, MSC, MSE)."""
    n, k = scores.shape
    grand = scores.mean()
    row_means = scores.mean(axis=1)
    col_means = scores.mean(axis=0)
    ssr = k * float(((row_means - grand) ** 2).sum())
    ssc = n * float(((col_means - grand) ** 2).sum())
    resid = scores - row_means[:, None] - col_means[None, :] + grand
    sse = float((resid**2).sum())
    return ssr / (n - 1), ssc / (k - 1), sse / ((n - 1) * (k - 1))


def icc_average_raters(
    ratings: RatingMatrix, confidence: float = 0.95
) -> IccEstimate:
    """Agreement ICC for the average of all raters' scores.

    The point estimate is (MSR - MSE) / (MSR + (MSC - MSE) / n). The
    confidence interval is built on the single-measures interval (F-based,
    with a Satterthwaite approximation for the rater-term degrees of
    freedom) and stepped up to average measures with the Spearman-Brown
    formula.

    Raises DegenerateRatingsError when all subjects have identical mean
    ratings (MSR would be zero and the ratio meaningless).
    """
    scores = ratings.scores
    n, k = scores.shape
    row_means = scores.mean(axis=1)
    if row_means.max() == row_means.min():
        raise DegenerateRatingsError(
            "all subjects have identical mean ratings; ICC is undefined"
        )
    msr, msc, mse = _mean_squares(scores)
    icc = (msr - mse) / (msr + (msc - mse) / n)

    if mse == 0.0 and msc == 0.0:
        # Perfect agreement: no rater or residual variance, interval collapses.
        return IccEstimate(icc, n, k, msr, msc, mse, icc, icc, confidence)

    # Single-measures point estimate feeding the Satterthwaite df.
    icc_a1 = (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))
    quantile = 1.0 - (1.0 - confidence) / 2.0
    if icc_a1 >= 1.0:
        low_1 = high_1 = 1.0
    else:
        a = (k * icc_a1) / (n * (1.0 - icc_a1))
        b = 1.0 + (k * icc_a1 * (n - 1)) / (n * (1.0 - icc_a1))
        v = (a * msc + b * mse) ** 2 / (
            (a * msc) ** 2 / (k - 1) + (b * mse) ** 2 / ((n - 1) * (k - 1))
        )
        fl = f_dist.ppf(quantile, n - 1, v)
        fu = f_dist.ppf(quantile, v, n - 1)
        denom_extra = k * msc + (k * n - k - n) * mse
        low_1 = n * (msr - fl * mse) / (fl * denom_extra + n * msr)
        high_1 = n * (fu * msr - mse) / (denom_extra + n * fu * msr)

    # Spearman-Brown step-up from single to average measures.
    def step_up(x: float) -> float:
        return k * x / (1.0 + (k - 1) * x)

    ci_low = max(-1.0, min(step_up(low_1), icc))
    ci_high = min(1.0, max(step_up(high_1), icc))
    return IccEstimate(icc, n, k, msr, msc, mse, ci_low, ci_high, confidence)


def interpret_icc(value: float) -> str:
    """Reliability band for an ICC value.

    Thresholds are exclusive at the lower edge: a value must exceed 0.50,
    0.75, or 0.90 to reach moderate, good, or excellent respectively.
    """
    if not -1.0 <= value <= 1.0:
        raise OutOfRangeError(f"ICC must lie in [-1, 1], got {value}")
    if value > 0.90:
        return "excellent"
    if value > 0.75:
        return "good"
    if value > 0.50:
        return "moderate"
    return "poor"


def mean_across_raters(ratings: RatingMatrix) -> np.ndarray:
    """Per-subject arithmetic mean across raters."""
    return ratings.scores.mean(axis=1)


# ---------------------------------------------------------------------------
# Ratings CSV: video_id,rater_id,question_id,score
#
# Videos rated by the same panel of raters form an annotator set; sets with
# disjoint panels are analyzed independently and pooled by stacking panel
# positions (the j-th rater of each panel, by sorted rater id, shares a
# column).
# ---------------------------------------------------------------------------


def load_ratings(path) -> dict[str, dict[str, dict[str, float]]]:
    """Parse a long-format ratings CSV into question -> video -> rater -> score."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc
    if not rows:
        raise ParseError("empty file", path=str(path), line=1)
    header = [h.strip() for h in rows[0]]
    if header != ["video_id", "rater_id", "question_id", "score"]:
        raise ParseError(
            "ratings header must be 'video_id,rater_id,question_id,score'",
            path=str(path),
            line=1,
        )
    data: dict[str, dict[str, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise ParseError("expected 4 cells", path=str(path), line=i)
        video, rater, question, score_text = row
        try:
            score = float(score_text)
        except ValueError as exc:
            raise ParseError(
                f"cannot parse score {score_text!r}", path=str(path), line=i
            ) from exc
        if rater in data[question][video]:
            raise ParseError(
                f"duplicate rating for video {video!r}, rater {rater!r}, "
                f"question {question!r}",
                path=str(path),
                line=i,
            )
        data[question][video][rater] = score
    return {q: dict(v) for q, v in data.items()}


def rating_matrices(
    question_scores: dict[str, dict[str, float]],
    question_id: str,
    score_range: tuple[int, int] = (0, 4),
) -> list[RatingMatrix]:
    """Group one question's ratings into complete per-panel matrices.

    Videos sharing an identical rater set form one annotator panel; each
    panel becomes a RatingMatrix. Incomplete video/rater grids within a
    panel are impossible by construction (the panel IS the rater set).
    """
    panels: dict[tuple[str, ...], list[str]] = defaultdict(list)
    for video in sorted(question_scores):
        panel = tuple(sorted(question_scores[video]))
        panels[panel].append(video)
    matrices = []
    for panel in sorted(panels):
        videos = panels[panel]
        scores = np.array(
            [[question_scores[v][r] for r in panel] for v in videos], dtype=float
        )
        matrices.append(
            RatingMatrix(
                question_id=question_id,
                scores=scores,
                subject_ids=tuple(videos),
                rater_ids=panel,
                score_range=score_range,
            )
        )
    return matrices


def pool_rating_matrices(matrices: list[RatingMatrix]) -> RatingMatrix:
    """Stack per-panel matrices into one matrix by panel position.

    Column j holds the j-th rater (by sorted id) of each video's own panel;
    raters across panels are treated as exchangeable. All panels must have
    the same size.
    """
    if not matrices:
        raise ValueError("no matrices to pool")
    ks = {m.n_raters for m in matrices}
    if len(ks) != 1:
        raise ValueError(f"panels have different rater counts: {sorted(ks)}")
    k = ks.pop()
    scores = np.vstack([m.scores for m in matrices])
    subject_ids = tuple(s for m in matrices for s in m.subject_ids)
    return RatingMatrix(
        question_id=matrices[0].question_id,
        scores=scores,
        subject_ids=subject_ids,
        rater_ids=tuple(f"panel_position_{j}" for j in range(k)),
        score_range=matrices[0].score_range,
    )
