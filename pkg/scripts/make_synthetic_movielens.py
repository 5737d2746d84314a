#!/usr/bin/env python3
"""Generate MovieLens-format CSVs (ratings.csv, movies.csv) at a chosen
scale, with a zipf-like popularity skew so the popularity-quantile filter
behaves like it does on the real data.

Defaults approximate the ml-latest-small scale: ~600 users, ~9.7K items,
~101K ratings.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

GENRES = [
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def generate(out_dir: Path, n_users: int, n_items: int, n_ratings: int, seed: int):
    rng = np.random.default_rng(seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    item_ids = np.arange(1, n_items + 1)
    # zipf-ish item popularity
    weights = 1.0 / np.arange(1, n_items + 1) ** 0.8
    weights /= weights.sum()
    item_perm = rng.permutation(n_items)  # decouple popularity from id order

    with open(out_dir / "movies.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["movieId", "title", "genres"])
        for item in item_ids:
            k = int(rng.integers(0, 4))
            if k == 0:
                tags = "(no genres listed)"
            else:
                tags = "|".join(sorted(rng.choice(GENRES, size=k, replace=False)))
            writer.writerow([item, f"Synthetic Movie {item} ({1980 + item % 45})", tags])

    seen = set()
    rows = []
    while len(rows) < n_ratings:
        u = int(rng.integers(1, n_users + 1))
        i = int(item_ids[item_perm[rng.choice(n_items, p=weights)]])
        if (u, i) in seen:
            continue
        seen.add((u, i))
        rating = float(rng.integers(1, 11)) / 2.0
        ts = int(rng.integers(8e8, 1.6e9))
        rows.append((u, i, rating, ts))
    rows.sort()
    with open(out_dir / "ratings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["userId", "movieId", "rating", "timestamp"])
        for u, i, r, ts in rows:
            writer.writerow([u, i, f"{r:.1f}", ts])
    print(f"wrote {out_dir / 'ratings.csv'} ({len(rows)} ratings, "
          f"{n_users} users, {n_items} items)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--users", type=int, default=600)
    parser.add_argument("--items", type=int, default=9700)
    parser.add_argument("--ratings", type=int, default=101000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    generate(args.out_dir, args.users, args.items, args.ratings, args.seed)


if __name__ == "__main__":
    main()
