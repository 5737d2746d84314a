#!/usr/bin/env python3
"""Run the full CLI pipeline end to end at toy scale.

Generates a small synthetic MovieLens-format dataset, runs ingest ->
train -> generate, fabricates a ratings CSV whose answers lean on the
exact counterfactual score, and runs analyze on it. Everything lands
under the given output directory.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from make_synthetic_movielens import generate  # noqa: E402

from cfxeval.cli import main as cli_main  # noqa: E402
from cfxeval.config import config_hash, parse_config  # noqa: E402
from cfxeval.analysis import DIMENSIONS  # noqa: E402


def fabricate_ratings(bundle_path: Path, report_path: Path, out_path: Path,
                      participants: int = 25, seed: int = 0):
    """Simulated participants: ratings increase with the explanation's CF
    score plus individual noise."""
    bundle = json.loads(bundle_path.read_text())
    cf = {}
    with open(report_path, encoding="utf-8") as fh:
        header = fh.readline()
        for line in fh:
            parts = line.rstrip("\n").split(",")
            cf[parts[0]] = float(parts[4])
    rng = np.random.default_rng(seed)
    lo, hi = min(cf.values()), max(cf.values())
    span = (hi - lo) or 1.0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question_id", "explanation_id", "dimension",
                         "participant_id", "rating"])
        for q in bundle["questions"]:
            base = 1.5 + 3.0 * (cf[q["explanation_id"]] - lo) / span
            for p in range(participants):
                for dim in DIMENSIONS:
                    noisy = base + rng.normal(0, 0.6)
                    rating = int(min(5, max(1, round(noisy))))
                    writer.writerow([q["question_id"], q["explanation_id"],
                                     dim, f"p{p:03d}", rating])
    print(f"wrote {out_path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("toy_run"))
    parser.add_argument("--users", type=int, default=60)
    parser.add_argument("--items", type=int, default=200)
    parser.add_argument("--ratings", type=int, default=2500)
    args = parser.parse_args()

    data_dir = args.out / "data"
    generate(data_dir, args.users, args.items, args.ratings, seed=0)

    config_path = args.out / "pipeline.cfg"
    config_path.write_text(
        f"ratings_path = {data_dir / 'ratings.csv'}\n"
        f"movies_path = {data_dir / 'movies.csv'}\n"
        "embedding_dim = 8\n"
        "iterations = 10\n"
        "history_size = 6\n"
        "explanation_size = 3\n"
        "popularity_quantile = 0.8\n"
        "workers = 1\n"
    )

    out = str(args.out / "artifacts")
    for cmd in ("ingest", "train", "generate"):
        code = cli_main([cmd, "--config", str(config_path), "--out", out])
        if code != 0:
            raise SystemExit(code)

    run_dir = Path(out) / config_hash(parse_config(config_path))
    ratings_csv = args.out / "survey_ratings.csv"
    fabricate_ratings(run_dir / "bundle.json", run_dir / "score_report.csv",
                      ratings_csv)
    code = cli_main(["analyze", "--config", str(config_path), "--out", out,
                     "--ratings", str(ratings_csv)])
    raise SystemExit(code)


if __name__ == "__main__":
    main()
