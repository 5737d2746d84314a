"""Command-line pipeline driver.

Subcommands: ingest, train, generate, score, analyze. Each takes
`--config <path>` and `--out <dir>`. Outputs land under
`<out>/<config-hash>/` and are write-once: a re-run with the same config
never mutates files already present.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import COMPARISONS, DIMENSIONS, SCORE_KINDS, build_report, load_ratings_csv
from .config import PipelineConfig, config_hash, parse_config
from .dataset import InteractionDataset, Interaction, load_movielens
from .errors import CfxError, ConfigError, DataError
from .mf import load_checkpoint, save_checkpoint, train
from .pipeline import (
    bundle_json,
    load_dataset,
    load_score_report_csv,
    run_generate,
    score_report_csv,
)

DATASET_CACHE = "dataset_cache.npz"
CHECKPOINT = "model.ckpt"
OBJECTIVE_LOG = "objective.csv"
BUNDLE = "bundle.json"
SCORE_REPORT = "score_report.csv"
SUMMARY = "summary.txt"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _out_dir(cfg: PipelineConfig, out: str) -> Path:
    path = Path(out) / config_hash(cfg)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_once(path: Path, data: bytes) -> bool:
    """First write wins; existing outputs are never touched."""
    if path.exists():
        return False
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.rename(path)
    return True


def _cache_dataset(dataset: InteractionDataset, path: Path) -> None:
    inter = np.array([[r.user, r.item, r.timestamp] for r in dataset.interactions],
                     dtype=np.int64).reshape(-1, 3)
    ratings = np.array([r.rating for r in dataset.interactions], dtype=np.float64)
    genres_json = json.dumps(
        {str(i): sorted(g) for i, g in dataset.genres.items()}, sort_keys=True)
    if not path.exists():
        np.savez_compressed(
            path,
            users=np.array(dataset.users, dtype=np.int64),
            items=np.array(dataset.items, dtype=np.int64),
            interactions=inter,
            ratings=ratings,
            genres=np.array(genres_json),
            rating_scale=np.array(dataset.rating_scale),
        )


def _load_cached_dataset(path: Path) -> InteractionDataset:
    with np.load(path, allow_pickle=False) as data:
        genres_raw = json.loads(str(data["genres"]))
        inter = data["interactions"]
        ratings = data["ratings"]
        rows = tuple(
            Interaction(int(u), int(i), float(r), int(ts))
            for (u, i, ts), r in zip(inter, ratings))
        return InteractionDataset(
            users=tuple(int(u) for u in data["users"]),
            items=tuple(int(i) for i in data["items"]),
            interactions=rows,
            genres={int(i): frozenset(g) for i, g in genres_raw.items()},
            rating_scale=(float(data["rating_scale"][0]), float(data["rating_scale"][1])),
        )


def _get_dataset(cfg: PipelineConfig, out_dir: Path) -> InteractionDataset:
    cache = out_dir / DATASET_CACHE
    if cache.exists():
        return _load_cached_dataset(cache)
    return load_dataset(cfg)


def cmd_ingest(cfg: PipelineConfig, out: str) -> int:
    out_dir = _out_dir(cfg, out)
    dataset = load_dataset(cfg)
    with_genres = sum(1 for g in dataset.genres.values() if g)
    coverage = with_genres / len(dataset.items) if dataset.items else 0.0
    summary = (
        f"users: {len(dataset.users)}\n"
        f"items: {len(dataset.items)}\n"
        f"interactions: {dataset.n_interactions}\n"
        f"genre_coverage: {coverage:.4f}\n"
    )
    _cache_dataset(dataset, out_dir / DATASET_CACHE)
    _write_once(out_dir / SUMMARY, summary.encode())
    sys.stdout.write(summary)
    return 0


def cmd_train(cfg: PipelineConfig, out: str) -> int:
    out_dir = _out_dir(cfg, out)
    dataset = _get_dataset(cfg, out_dir)
    model = train(dataset, cfg.train_config())
    ckpt = out_dir / CHECKPOINT
    if not ckpt.exists():
        save_checkpoint(model, ckpt)
    log = "half_sweep,objective\n" + "".join(
        f"{k},{obj!r}\n" for k, obj in enumerate(model.objective_trace))
    _write_once(out_dir / OBJECTIVE_LOG, log.encode())
    print(f"checkpoint: {ckpt}")
    print(f"objective: {model.objective_trace[0]!r} -> {model.objective_trace[-1]!r}")
    return 0


def _run_pipeline(cfg: PipelineConfig, out: str):
    out_dir = _out_dir(cfg, out)
    ckpt = out_dir / CHECKPOINT
    if not ckpt.exists():
        raise DataError(f"no trained checkpoint at {ckpt}; run `train` first")
    checkpoint = load_checkpoint(ckpt)
    if checkpoint.config != cfg.train_config():
        raise DataError("checkpoint was trained with a different configuration")
    dataset = _get_dataset(cfg, out_dir)
    return out_dir, run_generate(cfg, dataset)


def cmd_generate(cfg: PipelineConfig, out: str) -> int:
    out_dir, result = _run_pipeline(cfg, out)
    _write_once(out_dir / BUNDLE, bundle_json(result.bundle).encode())
    _write_once(out_dir / SCORE_REPORT, score_report_csv(result.rows).encode())
    print(f"bundle: {out_dir / BUNDLE}")
    print(f"questions: {len(result.bundle['questions'])}")
    print(f"candidates scored: {len(result.rows)}")
    print(f"cf/cfa spearman: {result.cf_cfa_spearman:.4f}")
    return 0


def cmd_score(cfg: PipelineConfig, out: str) -> int:
    out_dir, result = _run_pipeline(cfg, out)
    _write_once(out_dir / SCORE_REPORT, score_report_csv(result.rows).encode())
    print(f"score report: {out_dir / SCORE_REPORT}")
    print(f"candidates scored: {len(result.rows)}")
    return 0


def _correlation_table(values: dict, kinds=SCORE_KINDS) -> str:
    lines = ["score_kind," + ",".join(DIMENSIONS)]
    for kind in kinds:
        cells = [repr(values[(kind, dim)]) if (kind, dim) in values else ""
                 for dim in DIMENSIONS]
        lines.append(kind + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_analyze(cfg: PipelineConfig, out: str, ratings_path: str) -> int:
    out_dir = _out_dir(cfg, out)
    bundle_path = out_dir / BUNDLE
    report_path = out_dir / SCORE_REPORT
    if not bundle_path.exists() or not report_path.exists():
        raise DataError(f"missing {BUNDLE} or {SCORE_REPORT} in {out_dir}; "
                        "run `generate` first")
    ratings = load_ratings_csv(ratings_path)
    scores, labels = load_score_report_csv(report_path)
    report = build_report(scores, labels, ratings,
                          split=cfg.split_fraction, seed=cfg.split_seed)

    # everything is computed before any file is written: failure is atomic
    corr_csv = _correlation_table(report.correlations)
    mse_csv = _correlation_table(
        {key: mse for key, (_, _, mse) in report.regression.items()})
    ttest_lines = ["comparison,dimension,mean_a,std_a,mean_b,std_b,n,t,p"]
    for name, _, _ in COMPARISONS:
        for dim in DIMENSIONS:
            cell = report.ttests.get((name, dim))
            if cell is None:
                continue
            ttest_lines.append(",".join([
                name, dim, repr(cell.mean_a), repr(cell.std_a),
                repr(cell.mean_b), repr(cell.std_b), str(cell.n),
                repr(cell.t), repr(cell.p)]))
    ttest_csv = "\n".join(ttest_lines) + "\n"
    combined = {
        "correlations": {f"{k}|{d}": v for (k, d), v in report.correlations.items()},
        "regression": {f"{k}|{d}": {"slope": s, "intercept": b, "test_mse": m}
                       for (k, d), (s, b, m) in report.regression.items()},
        "ttests": {f"{name}|{d}": {"t": c.t, "p": c.p,
                                   "mean_a": c.mean_a, "std_a": c.std_a,
                                   "mean_b": c.mean_b, "std_b": c.std_b, "n": c.n}
                   for (name, d), c in report.ttests.items()},
    }

    ratings_digest = hashlib.sha256(Path(ratings_path).read_bytes()).hexdigest()[:12]
    analysis_dir = out_dir / f"analysis-{ratings_digest}"
    analysis_dir.mkdir(exist_ok=True)
    _write_once(analysis_dir / "correlations.csv", corr_csv.encode())
    _write_once(analysis_dir / "mse.csv", mse_csv.encode())
    _write_once(analysis_dir / "ttests.csv", ttest_csv.encode())
    _write_once(analysis_dir / "report.json",
                (json.dumps(combined, sort_keys=True, indent=2) + "\n").encode())
    print(f"analysis: {analysis_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfxeval",
                     description="Counterfactual evaluation of recommendation explanations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ingest", "train", "generate", "score", "analyze"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="pipeline config file")
        p.add_argument("--out", required=True, help="output directory")
        if name == "analyze":
            p.add_argument("--ratings", required=True, help="survey ratings CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = parse_config(args.config)
        if args.command == "ingest":
            return cmd_ingest(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out)
        if args.command == "generate":
            return cmd_generate(cfg, args.out)
        if args.command == "score":
            return cmd_score(cfg, args.out)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out, args.ratings)
        raise ConfigError(f"unknown command {args.command!r}")
    except CfxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
