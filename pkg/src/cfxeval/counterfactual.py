"""Counterfactual impact scores for item-based explanations.

The score asks: if the explaining items were removed from the user's
training rows and the model refit, how close does the recommended item
come to losing its top-1 slot? Two model providers sit behind the same
scoring path: a full retrain with identical config and seed, and a
warm-start finetune that re-solves only the target user's factor with
item factors frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Mapping

import numpy as np

from .dataset import InteractionDataset, remove_interactions
from .errors import DataError
from .mf import FactorModel, TrainConfig, fold_in_user, normalize_scores, rank, train

FULL_RETRAIN = "full-retrain"
WARM_START = "warm-start-finetune"
Strategy = Literal["full-retrain", "warm-start-finetune"]

DEFAULT_FINETUNE_ITERATIONS = 5


@dataclass(frozen=True)
class Explanation:
    """A user, the item recommended to them, and the explaining item set."""

    user: int
    recommended_item: int
    items: frozenset[int]

    def key(self) -> tuple[int, ...]:
        """Sorted item tuple; the deterministic tie-break identity."""
        return tuple(sorted(self.items))


@dataclass(frozen=True, eq=False)
class CounterfactualContext:
    """Candidate sets and normalized scores under the counterfactual model."""

    base_candidates: frozenset[int]
    cf_candidates: frozenset[int]
    cf_model: FactorModel
    normalized_scores: Mapping[int, float]

    def __post_init__(self):
        if set(self.normalized_scores) != set(self.cf_candidates):
            raise DataError("normalized scores must cover exactly the counterfactual candidates")


@dataclass(frozen=True)
class CfResult:
    score: float
    qualitative: bool
    benchmark_item: int
    strategy: str

    def __post_init__(self):
        if not -1.0 <= self.score <= 1.0:
            raise DataError(f"counterfactual score {self.score} outside [-1, 1]")


def validate_explanation(dataset: InteractionDataset, expl: Explanation) -> None:
    interacted = dataset.user_items(expl.user)
    if not expl.items <= interacted:
        missing = sorted(expl.items - interacted)
        raise DataError(f"explanation items {missing} not in user {expl.user}'s history")
    if expl.recommended_item in interacted:
        raise DataError(
            f"recommended item {expl.recommended_item} already interacted by user {expl.user}")


def cf_retrain(dataset: InteractionDataset, config: TrainConfig,
               expl: Explanation) -> FactorModel:
    """Counterfactual model by full retrain on the reduced interaction set,
    with the identical config and seed."""
    reduced = remove_interactions(dataset, expl.user, expl.items)
    return train(reduced, config)


def cf_finetune(base_model: FactorModel, dataset: InteractionDataset,
                expl: Explanation,
                iterations: int = DEFAULT_FINETUNE_ITERATIONS) -> FactorModel:
    """Warm-start approximation: item factors frozen, only the target user's
    factor re-solved against the remaining history.

    The per-user ridge solve is exact, so extra iterations are idempotent;
    the count is kept for protocol fidelity. A user left with no
    interactions gets the zero vector.
    """
    uix = base_model.user_index(expl.user)
    remaining = [(item, rating) for item, rating in dataset.user_history(expl.user)
                 if item not in expl.items]
    if remaining:
        p = base_model.user_factors[uix]
        for _ in range(iterations):
            p = fold_in_user(base_model, remaining, base_model.config.regularization)
    else:
        p = np.zeros(base_model.embedding_dim)
    user_factors = base_model.user_factors.copy()
    user_factors[uix] = p
    return FactorModel(
        base_model.user_ids, base_model.item_ids,
        user_factors, base_model.item_factors,
        base_model.config, base_model.objective_trace)


def build_context(dataset: InteractionDataset, cf_model: FactorModel,
                  expl: Explanation) -> CounterfactualContext:
    """Candidate sets from the original (unreduced) dataset plus min-max
    normalized counterfactual scores over the counterfactual candidates."""
    interacted = dataset.user_items(expl.user)
    base_candidates = frozenset(dataset.items) - interacted
    cf_candidates = base_candidates | expl.items
    ordered = sorted(cf_candidates)
    p = cf_model.user_factor(expl.user)
    factors = cf_model.item_factors
    # scalar dot per item: keeps scores bit-identical to predict()
    raw = np.array([float(factors[cf_model.item_index(i)] @ p) for i in ordered])
    normalized = normalize_scores(raw)
    return CounterfactualContext(
        base_candidates=base_candidates,
        cf_candidates=cf_candidates,
        cf_model=cf_model,
        normalized_scores=dict(zip(ordered, normalized)),
    )


def _argmax_item(scores: Mapping[int, float]) -> int:
    """Highest-scored item; exact ties broken by ascending item id."""
    return max(sorted(scores), key=lambda i: (scores[i], -i))


def cf_qualitative(context: CounterfactualContext, item: int) -> bool:
    """True iff the item is displaced from the tie-broken argmax."""
    if item not in context.cf_candidates:
        raise DataError(f"item {item} not in counterfactual candidate set")
    return _argmax_item(context.normalized_scores) != item


def score_context(context: CounterfactualContext, expl: Explanation,
                  strategy: str) -> CfResult:
    """Benchmark-item score from an already-built counterfactual context."""
    i = expl.recommended_item
    if i not in context.cf_candidates:
        raise DataError(f"recommended item {i} missing from counterfactual candidates")
    scores = context.normalized_scores
    values = list(scores.values())
    if max(values) == min(values):
        # degenerate all-equal case: neutral score, no displacement reported
        benchmark = _argmax_item({j: s for j, s in scores.items() if j != i})
        return CfResult(0.0, False, benchmark, strategy)
    benchmark = _argmax_item({j: s for j, s in scores.items() if j != i})
    score = scores[benchmark] - scores[i]
    qualitative = _argmax_item(scores) != i
    return CfResult(score, qualitative, benchmark, strategy)


def cf_score(dataset: InteractionDataset, config: TrainConfig,
             base_model: FactorModel, expl: Explanation, strategy: Strategy,
             finetune_iterations: int = DEFAULT_FINETUNE_ITERATIONS,
             verify_recommendation: bool = True) -> CfResult:
    """End-to-end counterfactual score for one explanation."""
    validate_explanation(dataset, expl)
    if verify_recommendation:
        interacted = dataset.user_items(expl.user)
        base_candidates = frozenset(dataset.items) - interacted
        top = rank(base_model, expl.user, base_candidates)[0][0]
        if top != expl.recommended_item:
            raise DataError(
                f"explanation claims recommended item {expl.recommended_item} "
                f"but the base model recommends {top}")
    if strategy == FULL_RETRAIN:
        cf_model = cf_retrain(dataset, config, expl)
    elif strategy == WARM_START:
        cf_model = cf_finetune(base_model, dataset, expl, finetune_iterations)
    else:
        raise DataError(f"unknown counterfactual strategy {strategy!r}")
    context = build_context(dataset, cf_model, expl)
    return score_context(context, expl, strategy)
