"""Baseline explanation scores: embedding cosine similarity and genre
Jaccard overlap, each averaged over the explaining items."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .counterfactual import Explanation
from .errors import DataError
from .mf import FactorModel


def _cosine(a: np.ndarray, b: np.ndarray, name_a: int, name_b: int) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0:
        raise DataError(f"item {name_a} has a zero-norm factor vector")
    if nb == 0.0:
        raise DataError(f"item {name_b} has a zero-norm factor vector")
    return float(a @ b) / (na * nb)


def item_sim(model: FactorModel, expl: Explanation) -> float:
    """Mean cosine similarity between each explaining item's embedding and
    the recommended item's embedding."""
    if not expl.items:
        raise DataError("explanation has no items")
    target = model.item_factor(expl.recommended_item)
    sims = [_cosine(model.item_factor(e), target, e, expl.recommended_item)
            for e in sorted(expl.items)]
    value = float(np.mean(sims))
    # guard against float drift past the cosine range
    assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9
    return min(1.0, max(-1.0, value))


def genre_jacc(genres: Mapping[int, frozenset[str]], expl: Explanation) -> float:
    """Mean Jaccard index between each explaining item's genre set and the
    recommended item's. A pair of empty sets contributes 0."""
    if not expl.items:
        raise DataError("explanation has no items")
    if expl.recommended_item not in genres:
        raise DataError(f"item {expl.recommended_item} missing from genre map")
    gi = genres[expl.recommended_item]
    terms = []
    for e in sorted(expl.items):
        if e not in genres:
            raise DataError(f"item {e} missing from genre map")
        ge = genres[e]
        union = ge | gi
        terms.append(len(ge & gi) / len(union) if union else 0.0)
    value = float(np.mean(terms))
    assert 0.0 <= value <= 1.0
    return value
