import numpy as np
import pytest

from cfxeval import Interaction, InteractionDataset


def make_random_dataset(n_users, n_items, n_inter, seed, rating_scale=(0.5, 5.0)):
    """Random explicit-feedback dataset with every user guaranteed >= 1 rating."""
    rng = np.random.default_rng(seed)
    users = tuple(range(1, n_users + 1))
    items = tuple(range(101, 101 + n_items))
    pairs = set()
    for u in users:  # anchor: one rating per user
        pairs.add((u, int(rng.choice(items))))
    while len(pairs) < n_inter:
        pairs.add((int(rng.choice(users)), int(rng.choice(items))))
    rows = tuple(
        Interaction(u, i, float(rng.integers(1, 11)) / 2.0, int(rng.integers(0, 10**9)))
        for u, i in sorted(pairs))
    genre_pool = ["Action", "Comedy", "Drama", "Horror", "Sci-Fi", "Romance"]
    genres = {}
    for item in items:
        k = int(rng.integers(0, 4))
        genres[item] = frozenset(rng.choice(genre_pool, size=k, replace=False)) if k else frozenset()
    return InteractionDataset(users, items, rows, genres, rating_scale)


@pytest.fixture
def toy_dataset():
    """3 users x 4 items, hand-laid-out."""
    users = (1, 2, 3)
    items = (10, 20, 30, 40)
    rows = (
        Interaction(1, 10, 4.0, 100),
        Interaction(1, 20, 3.0, 101),
        Interaction(1, 30, 5.0, 102),
        Interaction(2, 10, 2.0, 103),
        Interaction(2, 40, 4.5, 104),
        Interaction(3, 20, 1.0, 105),
        Interaction(3, 30, 3.5, 106),
        Interaction(3, 40, 5.0, 107),
    )
    genres = {
        10: frozenset({"Action", "Comedy"}),
        20: frozenset({"Comedy", "Drama"}),
        30: frozenset({"Drama"}),
        40: frozenset(),
    }
    return InteractionDataset(users, items, rows, genres)


@pytest.fixture(scope="session")
def medium_dataset():
    """20 users x 40 items, enough structure to train on."""
    return make_random_dataset(20, 40, 300, seed=11)


def write_movielens_csvs(tmp_path, ratings_rows, movies_rows):
    """ratings_rows: (user, item, rating, ts); movies_rows: (item, title, genres)."""
    ratings = tmp_path / "ratings.csv"
    movies = tmp_path / "movies.csv"
    lines = ["userId,movieId,rating,timestamp"]
    lines += [f"{u},{i},{r},{ts}" for u, i, r, ts in ratings_rows]
    ratings.write_text("\n".join(lines) + "\n")
    mlines = ["movieId,title,genres"]
    mlines += [f'{i},"{t}",{g}' for i, t, g in movies_rows]
    movies.write_text("\n".join(mlines) + "\n")
    return ratings, movies
