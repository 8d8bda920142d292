"""Inter-rater agreement: ICC estimates, intervals, bands, CSV plumbing."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from expressiveness.core import RatingMatrix
from expressiveness.errors import DegenerateRatingsError, ParseError
from expressiveness.reliability import (
    icc_average_raters,
    interpret_icc,
    load_ratings,
    mean_across_raters,
    pool_rating_matrices,
    rating_matrices,
)


def brute_force_icc(scores: np.ndarray, confidence: float = 0.95):
    """Average-measures agreement ICC from first principles.

    Builds the two-way ANOVA table with explicit loops over cells, then
    finds each interval endpoint by numerically inverting the F test
    statistic (root finding) instead of transcribing the closed form, so
    the check is independent of the library's algebra.
    """
    from scipy.optimize import brentq

    n, k = scores.shape
    grand = scores.sum() / (n * k)
    row_means = [sum(scores[i, :]) / k for i in range(n)]
    col_means = [sum(scores[:, j]) / n for j in range(k)]
    ss_rows = k * sum((m - grand) ** 2 for m in row_means)
    ss_cols = n * sum((m - grand) ** 2 for m in col_means)
    ss_total = sum(
        (scores[i, j] - grand) ** 2 for i in range(n) for j in range(k)
    )
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))
    icc = (msr - mse) / (msr + (msc - mse) / n)
    icc_1 = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)

    def ab(rho):
        a = k * rho / (n * (1 - rho))
        return a, 1 + k * rho * (n - 1) / (n * (1 - rho))

    a_hat, b_hat = ab(icc_1)
    nu = (a_hat * msc + b_hat * mse) ** 2 / (
        (a_hat * msc) ** 2 / (k - 1)
        + (b_hat * mse) ** 2 / ((n - 1) * (k - 1))
    )
    q = 1 - (1 - confidence) / 2
    f_low = stats.f.ppf(q, n - 1, nu)
    f_up = stats.f.ppf(q, nu, n - 1)

    def endpoint(f_crit):
        def gap(rho):
            a, b = ab(rho)
            return msr - f_crit * (a * msc + b * mse)

        return brentq(gap, -1 / (k - 1) + 1e-9, 1 - 1e-9, xtol=1e-13)

    lo1 = endpoint(f_low)
    hi1 = endpoint(1.0 / f_up)
    step_up = lambda r: k * r / (1 + (k - 1) * r)
    return icc, step_up(lo1), step_up(hi1), (msr, msc, mse)


def random_matrix(seed: int, n: int = 20, k: int = 5) -> RatingMatrix:
    rng = np.random.default_rng(seed)
    truth = rng.normal(2.0, 0.9, n)
    rater_shift = rng.normal(0.0, 0.3, k)
    noisy = truth[:, None] + rater_shift + rng.normal(0.0, 0.5, (n, k))
    scores = np.clip(np.rint(noisy), 0, 4)
    return RatingMatrix(
        question_id="q1",
        scores=scores,
        subject_ids=tuple(f"v{i}" for i in range(n)),
        rater_ids=tuple(f"r{j}" for j in range(k)),
    )


def test_icc_matches_brute_force_oracle():
    for seed in range(25):
        m = random_matrix(seed)
        est = icc_average_raters(m)
        icc, lo, hi, (msr, msc, mse) = brute_force_icc(np.asarray(m.scores))
        assert est.icc == pytest.approx(icc, abs=1e-10)
        assert est.msr == pytest.approx(msr, abs=1e-10)
        assert est.msc == pytest.approx(msc, abs=1e-10)
        assert est.mse == pytest.approx(mse, abs=1e-10)
        assert est.ci_low == pytest.approx(lo, abs=1e-8)
        assert est.ci_high == pytest.approx(hi, abs=1e-8)


def test_icc_textbook_fixture():
    # Shrout & Fleiss (1979) Table 2 judges data, ICC(A,k) a.k.a. ICC(2,4)
    # stepped up: single-measure value 0.29 is the published rounding.
    scores = np.array(
        [
            [9, 2, 5, 8],
            [6, 1, 3, 2],
            [8, 4, 6, 8],
            [7, 1, 2, 6],
            [10, 5, 6, 9],
            [6, 2, 4, 7],
        ],
        dtype=float,
    )
    m = RatingMatrix(
        question_id="judges",
        scores=scores,
        subject_ids=tuple("abcdef"),
        rater_ids=("j1", "j2", "j3", "j4"),
        score_range=(0, 10),
    )
    est = icc_average_raters(m)
    k, single = 4, None
    # invert the Spearman-Brown step-up to recover the single-rater value
    single = est.icc / (k - (k - 1) * est.icc)
    assert round(single, 2) == 0.29
    assert 0.6 < est.icc < 0.7


def test_perfect_agreement_gives_one():
    scores = np.tile(np.array([[0.0], [1.0], [2.0], [3.0], [4.0]]), (1, 3))
    m = RatingMatrix(
        question_id="q",
        scores=scores,
        subject_ids=tuple(f"v{i}" for i in range(5)),
        rater_ids=("a", "b", "c"),
    )
    est = icc_average_raters(m)
    assert est.icc == pytest.approx(1.0, abs=1e-12)


def test_identical_subject_rows_degenerate():
    scores = np.tile(np.array([[1.0, 2.0, 3.0]]), (6, 1))
    m = RatingMatrix(
        question_id="q",
        scores=scores,
        subject_ids=tuple(f"v{i}" for i in range(6)),
        rater_ids=("a", "b", "c"),
    )
    with pytest.raises(DegenerateRatingsError):
        icc_average_raters(m)


def test_added_noise_decreases_icc():
    rng = np.random.default_rng(5)
    truth = rng.normal(2.0, 1.0, 40)
    clean = np.clip(np.rint(truth[:, None] + rng.normal(0, 0.25, (40, 6))), 0, 4)
    noisy = np.clip(np.rint(truth[:, None] + rng.normal(0, 1.2, (40, 6))), 0, 4)
    ids = tuple(f"v{i}" for i in range(40))
    raters = tuple(f"r{j}" for j in range(6))
    icc_clean = icc_average_raters(
        RatingMatrix("q", clean, ids, raters)
    ).icc
    icc_noisy = icc_average_raters(
        RatingMatrix("q", noisy, ids, raters)
    ).icc
    assert icc_clean > icc_noisy


def test_ci_contains_estimate_and_tightens_with_n():
    wide = icc_average_raters(random_matrix(1, n=12))
    narrow = icc_average_raters(random_matrix(1, n=80))
    for est in (wide, narrow):
        assert est.ci_low <= est.icc <= est.ci_high
    assert (narrow.ci_high - narrow.ci_low) < (wide.ci_high - wide.ci_low)


def test_rater_permutation_invariance():
    m = random_matrix(7)
    est = icc_average_raters(m)
    perm = [3, 0, 4, 1, 2]
    shuffled = RatingMatrix(
        question_id=m.question_id,
        scores=np.asarray(m.scores)[:, perm],
        subject_ids=m.subject_ids,
        rater_ids=tuple(m.rater_ids[j] for j in perm),
    )
    est2 = icc_average_raters(shuffled)
    assert est2.icc == pytest.approx(est.icc, abs=1e-12)
    assert est2.ci_low == pytest.approx(est.ci_low, abs=1e-12)


def test_interpret_icc_bands():
    assert interpret_icc(0.3) == "poor"
    assert interpret_icc(0.5) == "poor"  # exclusive lower edge
    assert interpret_icc(0.6) == "moderate"
    assert interpret_icc(0.75) == "moderate"
    assert interpret_icc(0.8) == "good"
    assert interpret_icc(0.9) == "good"
    assert interpret_icc(0.95) == "excellent"


def test_mean_across_raters():
    m = random_matrix(2, n=8, k=4)
    means = mean_across_raters(m)
    assert np.allclose(means, np.asarray(m.scores).mean(axis=1))


def write_ratings_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id,rater_id,question_id,score\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def test_load_ratings_and_panel_split(tmp_path):
    rows = []
    # panel A rates v1/v2, panel B rates v3/v4, both on question q1
    for vid in ("v1", "v2"):
        for rid in ("a1", "a2", "a3"):
            rows.append((vid, rid, "q1", 2))
    for vid in ("v3", "v4"):
        for rid in ("b1", "b2", "b3"):
            rows.append((vid, rid, "q1", 3))
    rows[0] = ("v1", "a1", "q1", 4)  # break the constant grid
    rows[6] = ("v3", "b1", "q1", 1)
    path = tmp_path / "ratings.csv"
    write_ratings_csv(path, rows)
    by_question = load_ratings(path)
    assert set(by_question) == {"q1"}
    panels = rating_matrices(by_question["q1"], "q1")
    assert len(panels) == 2
    panel_raters = {m.rater_ids for m in panels}
    assert panel_raters == {("a1", "a2", "a3"), ("b1", "b2", "b3")}
    pooled = pool_rating_matrices(panels)
    assert len(pooled.subject_ids) == 4
    assert len(pooled.rater_ids) == 3


def test_load_ratings_rejects_duplicates(tmp_path):
    rows = [("v1", "r1", "q1", 2), ("v1", "r1", "q1", 3)]
    path = tmp_path / "ratings.csv"
    write_ratings_csv(path, rows)
    with pytest.raises(ParseError):
        load_ratings(path)


def test_load_ratings_rejects_bad_header(tmp_path):
    path = tmp_path / "ratings.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video,rater,question,score\nv1,r1,q1,2\n")
    with pytest.raises(ParseError):
        load_ratings(path)
