"""Explanation candidate enumeration and score-level selection.

Two selection protocols coexist: counterfactual scores are computed per
3-item subset and the high / closest-to-mean / low subsets picked, while
the baselines are scored per history item and grouped into top-k /
nearest-mean-k / bottom-k item sets. Every tie breaks on the
lexicographically smallest sorted item-id tuple.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Mapping, Sequence

from .counterfactual import Explanation
from .errors import DataError

LEVELS = ("high", "mean", "low")


@dataclass(frozen=True)
class CandidateSet:
    user: int
    recommended_item: int
    k: int
    candidates: tuple[Explanation, ...]

    def __post_init__(self):
        keys = {c.key() for c in self.candidates}
        if len(keys) != len(self.candidates):
            raise DataError("candidate explanations must be distinct as sets")


@dataclass(frozen=True)
class SelectionTriple:
    high: Explanation
    mean: Explanation
    low: Explanation
    score_kind: str
    scores: tuple[float, float, float]

    def __post_init__(self):
        hi, mid, lo = self.scores
        # tiny slack: subset scores recomputed as means can drift an ulp
        if not (hi >= mid - 1e-12 and mid >= lo - 1e-12):
            raise DataError(f"selection scores out of order: {self.scores}")


def enumerate_candidates(user: int, recommended: int, history: Sequence[int],
                         k: int = 3) -> CandidateSet:
    """All k-subsets of the history, in lexicographic item-id order."""
    if k > len(history):
        raise DataError(f"subset size {k} exceeds history size {len(history)}")
    if k < 1:
        raise DataError(f"subset size must be >= 1, got {k}")
    items = sorted(history)
    cands = tuple(Explanation(user, recommended, frozenset(c))
                  for c in combinations(items, k))
    assert len(cands) == comb(len(items), k)
    return CandidateSet(user, recommended, k, cands)


def select_triple(scored: Sequence[tuple[Explanation, float]],
                  score_kind: str = "") -> SelectionTriple:
    """Pick the highest-, closest-to-mean- and lowest-scored candidates."""
    if not scored:
        raise DataError("cannot select from an empty scored list")
    mu = sum(s for _, s in scored) / len(scored)
    high = min(scored, key=lambda es: (-es[1], es[0].key()))
    low = min(scored, key=lambda es: (es[1], es[0].key()))
    mid = min(scored, key=lambda es: (abs(es[1] - mu), es[0].key()))
    return SelectionTriple(high[0], mid[0], low[0], score_kind,
                           (high[1], mid[1], low[1]))


def select_baseline_items(history: Sequence[int], per_item_scores: Mapping[int, float],
                          k: int, level: str) -> tuple[int, ...]:
    """Group k history items by per-item score at the given level."""
    if level not in LEVELS:
        raise DataError(f"unknown selection level {level!r}")
    if k > len(history):
        raise DataError(f"group size {k} exceeds history size {len(history)}")
    for item in history:
        if item not in per_item_scores:
            raise DataError(f"missing score for history item {item}")
    items = sorted(set(history))
    if level == "high":
        key = lambda i: (-per_item_scores[i], i)
    elif level == "low":
        key = lambda i: (per_item_scores[i], i)
    else:
        mu = sum(per_item_scores[i] for i in items) / len(items)
        key = lambda i: (abs(per_item_scores[i] - mu), i)
    return tuple(sorted(sorted(items, key=key)[:k]))
