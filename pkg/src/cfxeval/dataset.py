"""MovieLens-style interaction data: loading, popularity filtering and
synthetic watching histories.

All operations are pure: they return new datasets and never mutate their
inputs, so datasets can be shared freely across workers.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError, ParseError

DEFAULT_RATING_SCALE = (0.5, 5.0)
NO_GENRES = "(no genres listed)"


class Interaction(NamedTuple):
    user: int
    item: int
    rating: float
    timestamp: int


@dataclass(frozen=True)
class InteractionDataset:
    """The rating matrix plus per-item genre tags.

    `users` and `items` are kept sorted ascending; every interaction must
    reference ids present there, with at most one row per (user, item).
    """

    users: tuple[int, ...]
    items: tuple[int, ...]
    interactions: tuple[Interaction, ...]
    genres: Mapping[int, frozenset[str]]
    rating_scale: tuple[float, float] = DEFAULT_RATING_SCALE

    def __post_init__(self):
        users = set(self.users)
        items = set(self.items)
        lo, hi = self.rating_scale
        seen: set[tuple[int, int]] = set()
        for row in self.interactions:
            if row.user not in users:
                raise DataError(f"interaction references unknown user {row.user}")
            if row.item not in items:
                raise DataError(f"interaction references unknown item {row.item}")
            if (row.user, row.item) in seen:
                raise DataError(f"duplicate interaction for pair ({row.user}, {row.item})")
            seen.add((row.user, row.item))
            if not (lo <= row.rating <= hi):
                raise DataError(
                    f"rating {row.rating} for pair ({row.user}, {row.item}) "
                    f"outside scale [{lo}, {hi}]"
                )

    @property
    def n_interactions(self) -> int:
        return len(self.interactions)

    def user_items(self, user: int) -> frozenset[int]:
        """Items the user has interacted with."""
        if user not in set(self.users):
            raise DataError(f"unknown user {user}")
        return frozenset(row.item for row in self.interactions if row.user == user)

    def user_history(self, user: int) -> list[tuple[int, float]]:
        """(item, rating) pairs for one user."""
        return [(row.item, row.rating) for row in self.interactions if row.user == user]

    def item_counts(self) -> Counter:
        """Interaction count per item; items without interactions count 0."""
        counts = Counter({item: 0 for item in self.items})
        for row in self.interactions:
            counts[row.item] += 1
        return counts

    def interaction_multiset(self) -> Counter:
        return Counter(self.interactions)


@dataclass(frozen=True)
class SyntheticHistory:
    """A hypothetical user's watching history drawn from popular items."""

    user: int
    history: tuple[int, ...]
    imputed_rating: float
    seed: int

    def __post_init__(self):
        if len(set(self.history)) != len(self.history):
            raise DataError("history items must be distinct")


def _parse_movies(movies_path) -> dict[int, frozenset[str]]:
    genres: dict[int, frozenset[str]] = {}
    with open(movies_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["movieId", "title", "genres"]:
            raise ParseError(movies_path, 1, 1, "expected header 'movieId,title,genres'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(movies_path, lineno, len(row) + 1,
                                 f"expected 3 columns, got {len(row)}")
            try:
                item = int(row[0])
            except ValueError:
                raise ParseError(movies_path, lineno, 1, f"bad movieId {row[0]!r}") from None
            tags = row[2].strip()
            if tags == NO_GENRES or tags == "":
                genres[item] = frozenset()
            else:
                genres[item] = frozenset(tags.split("|"))
    return genres


def load_movielens(ratings_path, movies_path,
                   rating_scale: tuple[float, float] = DEFAULT_RATING_SCALE) -> InteractionDataset:
    """Load the two MovieLens CSV files into an InteractionDataset.

    Duplicate (user, item) rows keep the latest timestamp; items listed in
    the movies file but absent from the ratings are retained with zero
    interactions.
    """
    genres = _parse_movies(movies_path)
    latest: dict[tuple[int, int], Interaction] = {}
    lo, hi = rating_scale
    with open(ratings_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["userId", "movieId", "rating", "timestamp"]:
            raise ParseError(ratings_path, 1, 1,
                             "expected header 'userId,movieId,rating,timestamp'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(ratings_path, lineno, len(row) + 1,
                                 f"expected 4 columns, got {len(row)}")
            try:
                user = int(row[0])
            except ValueError:
                raise ParseError(ratings_path, lineno, 1, f"bad userId {row[0]!r}") from None
            try:
                item = int(row[1])
            except ValueError:
                raise ParseError(ratings_path, lineno, 2, f"bad movieId {row[1]!r}") from None
            try:
                rating = float(row[2])
            except ValueError:
                raise ParseError(ratings_path, lineno, 3, f"bad rating {row[2]!r}") from None
            try:
                ts = int(row[3])
            except ValueError:
                raise ParseError(ratings_path, lineno, 4, f"bad timestamp {row[3]!r}") from None
            if not (lo <= rating <= hi):
                raise DataError(
                    f"{ratings_path}:{lineno}: rating {rating} outside scale [{lo}, {hi}]")
            prev = latest.get((user, item))
            if prev is None or ts >= prev.timestamp:
                latest[(user, item)] = Interaction(user, item, rating, ts)

    interactions = tuple(latest[key] for key in sorted(latest))
    users = tuple(sorted({row.user for row in interactions}))
    item_ids = {row.item for row in interactions} | set(genres)
    items = tuple(sorted(item_ids))
    # Items rated but missing from movies.csv get an empty genre set.
    full_genres = {item: genres.get(item, frozenset()) for item in items}
    return InteractionDataset(users, items, interactions, full_genres, rating_scale)


def popularity_threshold(dataset: InteractionDataset, quantile: float) -> int:
    """Nearest-rank quantile of the per-item interaction-count distribution."""
    if not 0.0 <= quantile <= 1.0:
        raise DataError(f"quantile {quantile} outside [0, 1]")
    if dataset.n_interactions == 0:
        raise DataError("dataset has no interactions")
    counts = sorted(dataset.item_counts().values())
    rank = max(1, math.ceil(quantile * len(counts)))
    return counts[rank - 1]


def sample_history(dataset: InteractionDataset, h: int, quantile: float,
                   imputed_rating: float, seed: int) -> SyntheticHistory:
    """Draw h distinct items, uniformly, from those passing the popularity filter."""
    if h < 1:
        raise DataError(f"history size must be >= 1, got {h}")
    threshold = popularity_threshold(dataset, quantile)
    counts = dataset.item_counts()
    qualifying = [item for item in dataset.items if counts[item] >= threshold]
    if len(qualifying) < h:
        raise DataError(
            f"need {h} items above the popularity threshold, only {len(qualifying)} qualify")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(qualifying), size=h, replace=False)
    history = tuple(qualifying[int(p)] for p in picks)
    user = max(dataset.users) + 1 if dataset.users else 1
    return SyntheticHistory(user, history, imputed_rating, seed)


def materialize(dataset: InteractionDataset, hist: SyntheticHistory) -> InteractionDataset:
    """Turn a synthetic history into real training rows for a fresh user."""
    if hist.user in set(dataset.users):
        raise DataError(f"user id {hist.user} already present in dataset")
    items = set(dataset.items)
    for item in hist.history:
        if item not in items:
            raise DataError(f"history item {item} not in dataset items")
    added = tuple(Interaction(hist.user, item, hist.imputed_rating, 0)
                  for item in hist.history)
    return InteractionDataset(
        users=tuple(sorted(dataset.users + (hist.user,))),
        items=dataset.items,
        interactions=dataset.interactions + added,
        genres=dataset.genres,
        rating_scale=dataset.rating_scale,
    )


def remove_interactions(dataset: InteractionDataset, user: int,
                        items: Iterable[int]) -> InteractionDataset:
    """Drop the (user, item) pairs from the interaction history."""
    targets = set(items)
    present = {row.item for row in dataset.interactions if row.user == user}
    for item in targets:
        if item not in present:
            raise DataError(f"pair ({user}, {item}) not present in dataset")
    kept = tuple(row for row in dataset.interactions
                 if not (row.user == user and row.item in targets))
    return InteractionDataset(
        users=dataset.users,
        items=dataset.items,
        interactions=kept,
        genres=dataset.genres,
        rating_scale=dataset.rating_scale,
    )
