"""Statistical machinery for the survey analysis: Pearson correlation,
one-feature OLS with a held-out split, and one-tailed paired t-tests.

The Student-t CDF is computed in-house through the regularized incomplete
beta function (continued fraction), accurate to about 1e-8 absolute, so
the package carries no statistical dependency beyond numpy.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, NumericalError

DIMENSIONS = (
    "Explainability",
    "Informativeness",
    "Effectiveness",
    "Persuasiveness",
    "Transparency",
    "Trustworthiness",
    "Satisfaction",
)

SCORE_KINDS = ("cf", "cfa", "item-sim", "genre-jacc")


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise DataError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise DataError("pearson needs at least 2 points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        raise DataError("pearson undefined for zero-variance input")
    return float(np.sum(xc * yc)) / (sx * sy)


def _average_ranks(xs: Sequence[float]) -> np.ndarray:
    """Ranks 1..n with ties assigned their average rank."""
    x = np.asarray(xs, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation: Pearson on average-tie ranks."""
    return pearson(_average_ranks(xs), _average_ranks(ys))


# ---------------------------------------------------------------------------
# Student-t CDF via regularized incomplete beta

_BETA_EPS = 1e-12
_BETA_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise NumericalError(f"incomplete beta continued fraction did not converge "
                         f"(a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise DataError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DataError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """CDF of the Student t distribution with df degrees of freedom."""
    if df <= 0:
        raise DataError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc_regularized(0.5 * df, 0.5, x)
    return tail if t < 0 else 1.0 - tail


def paired_ttest_upper(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Upper-tail paired t-test of H1: mean(a) > mean(b).

    Returns (t, p) with t = mean(d) / (sd(d)/sqrt(n)), sample sd (n-1),
    d = a - b, p = 1 - StudentT_CDF(t; n-1).
    """
    if len(a) != len(b):
        raise DataError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise DataError("paired t-test needs at least 2 pairs")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DataError("paired t-test undefined: differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    p = 1.0 - student_t_cdf(t, n - 1)
    return t, p


def ols_fit_eval(pairs: Sequence[tuple[float, float]], split: float = 0.7,
                 seed: int = 0) -> tuple[float, float, float]:
    """One-feature OLS on a random train split, MSE on the held-out rest."""
    n = len(pairs)
    if not 0.0 < split < 1.0:
        raise DataError(f"split fraction {split} outside (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(split * n))
    train_ix, test_ix = perm[:n_train], perm[n_train:]
    if len(train_ix) < 2:
        raise DataError(f"only {len(train_ix)} training points after split")
    if len(test_ix) < 1:
        raise DataError("no test points after split")
    arr = np.asarray(pairs, dtype=np.float64)
    x, y = arr[train_ix, 0], arr[train_ix, 1]
    xc = x - x.mean()
    var = float(np.sum(xc * xc))
    if var == 0.0:
        raise DataError("training scores have zero variance")
    slope = float(np.sum(xc * (y - y.mean()))) / var
    intercept = float(y.mean() - slope * x.mean())
    xt, yt = arr[test_ix, 0], arr[test_ix, 1]
    mse = float(np.mean((yt - (slope * xt + intercept)) ** 2))
    return slope, intercept, mse


# ---------------------------------------------------------------------------
# Rating tables and the combined report


@dataclass(frozen=True)
class RatingRow:
    question_id: str
    explanation_id: str
    dimension: str
    participant_id: str
    rating: int


@dataclass(frozen=True)
class RatingTable:
    rows: tuple[RatingRow, ...]

    def __post_init__(self):
        for row in self.rows:
            if row.dimension not in DIMENSIONS:
                raise DataError(f"unknown rating dimension {row.dimension!r}")
            if row.rating not in (1, 2, 3, 4, 5):
                raise DataError(f"rating {row.rating} outside 1..5")

    def mean_ratings(self) -> dict[tuple[str, str], float]:
        """Average over participants per (explanation id, dimension)."""
        acc: dict[tuple[str, str], list[int]] = defaultdict(list)
        for row in self.rows:
            acc[(row.explanation_id, row.dimension)].append(row.rating)
        return {key: sum(vals) / len(vals) for key, vals in acc.items()}


def load_ratings_csv(path) -> RatingTable:
    expected = ["question_id", "explanation_id", "dimension", "participant_id", "rating"]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"{path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                rating = int(row[4])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad rating {row[4]!r}") from None
            rows.append(RatingRow(row[0], row[1], row[2], row[3], rating))
    if not rows:
        raise DataError(f"{path}: ratings file has no data rows")
    return RatingTable(tuple(rows))


@dataclass(frozen=True)
class TTestCell:
    t: float
    p: float
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    n: int


@dataclass(frozen=True)
class AnalysisReport:
    correlations: Mapping[tuple[str, str], float]
    regression: Mapping[tuple[str, str], tuple[float, float, float]]
    ttests: Mapping[tuple[str, str], TTestCell]

    def __post_init__(self):
        for value in self.correlations.values():
            if not -1.0 - 1e-12 <= value <= 1.0 + 1e-12:
                raise DataError(f"correlation {value} outside [-1, 1]")
        for _, _, mse in self.regression.values():
            if mse < 0:
                raise DataError("negative MSE")
        for cell in self.ttests.values():
            if not 0.0 <= cell.p <= 1.0:
                raise DataError(f"p-value {cell.p} outside [0, 1]")


# Labels attached to explanations by the selection stage; used to locate
# the comparison groups for the paired t-tests.
LABEL_CF_HIGH = "cf:high"
LABEL_CF_LOW = "cf:low"
LABEL_ITEM_SIM_HIGH = "item-sim:high"
LABEL_GENRE_JACC_HIGH = "genre-jacc:high"

COMPARISONS = (
    ("high-cf-vs-low-cf", LABEL_CF_HIGH, LABEL_CF_LOW),
    ("high-cf-vs-high-item-sim", LABEL_CF_HIGH, LABEL_ITEM_SIM_HIGH),
    ("high-cf-vs-high-genre-jacc", LABEL_CF_HIGH, LABEL_GENRE_JACC_HIGH),
)


def _participant_ratings(table: RatingTable, expl_id: str,
                         dimension: str) -> dict[str, float]:
    acc: dict[str, list[int]] = defaultdict(list)
    for row in table.rows:
        if row.explanation_id == expl_id and row.dimension == dimension:
            acc[row.participant_id].append(row.rating)
    return {pid: sum(v) / len(v) for pid, v in acc.items()}


def build_report(scores: Mapping[str, Mapping[str, float]],
                 labels: Mapping[str, Sequence[str]],
                 ratings: RatingTable,
                 split: float = 0.7, seed: int = 0) -> AnalysisReport:
    """Correlations, regressions and t-tests against human ratings.

    `scores` maps explanation id -> {score kind -> value}; `labels` maps
    explanation id -> selection labels such as 'cf:high'.
    """
    rated_ids = sorted({row.explanation_id for row in ratings.rows})
    missing = [eid for eid in rated_ids
               if eid not in scores or any(k not in scores[eid] for k in SCORE_KINDS)]
    if missing:
        raise DataError(f"rated explanations without full scores: {missing}")

    means = ratings.mean_ratings()
    correlations: dict[tuple[str, str], float] = {}
    regression: dict[tuple[str, str], tuple[float, float, float]] = {}
    for kind in SCORE_KINDS:
        for dim in DIMENSIONS:
            ids = [eid for eid in rated_ids if (eid, dim) in means]
            if len(ids) < 2:
                continue
            xs = [scores[eid][kind] for eid in ids]
            ys = [means[(eid, dim)] for eid in ids]
            try:
                correlations[(kind, dim)] = pearson(xs, ys)
                regression[(kind, dim)] = ols_fit_eval(list(zip(xs, ys)), split, seed)
            except DataError:
                continue  # degenerate cell (zero variance): left out of the tables

    label_to_id: dict[str, str] = {}
    for eid, labs in labels.items():
        for lab in labs:
            label_to_id[lab] = eid

    ttests: dict[tuple[str, str], TTestCell] = {}
    for name, label_a, label_b in COMPARISONS:
        if label_a not in label_to_id or label_b not in label_to_id:
            continue
        eid_a, eid_b = label_to_id[label_a], label_to_id[label_b]
        for dim in DIMENSIONS:
            ra = _participant_ratings(ratings, eid_a, dim)
            rb = _participant_ratings(ratings, eid_b, dim)
            common = sorted(set(ra) & set(rb))
            if len(common) < 2:
                continue
            a = [ra[p] for p in common]
            b = [rb[p] for p in common]
            try:
                t, p = paired_ttest_upper(a, b)
            except DataError:
                continue  # zero-variance differences: no test for this cell
            ttests[(name, dim)] = TTestCell(
                t, p,
                float(np.mean(a)), float(np.std(a, ddof=1)),
                float(np.mean(b)), float(np.std(b, ddof=1)),
                len(common))
    return AnalysisReport(correlations, regression, ttests)
