"""End-to-end survey-generation pipeline.

Stages: sample a synthetic popular-item history, materialize it into the
training data, train the base model, recommend top-1, enumerate the
3-item explanation candidates, score each with the counterfactual scores
and the two baselines, select the high / mean / low explanation per
score, and emit the survey bundle plus a score report.

Scoring the candidates is embarrassingly parallel; full retrains fan out
over a process pool when `workers > 1`, and rows are sorted by
explanation id before writing so output never depends on worker order.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import baselines
from .analysis import spearman
from .config import PipelineConfig, config_hash
from .counterfactual import (
    FULL_RETRAIN,
    WARM_START,
    CfResult,
    Explanation,
    build_context,
    cf_finetune,
    cf_retrain,
    score_context,
)
from .dataset import InteractionDataset, SyntheticHistory, load_movielens, materialize, sample_history
from .errors import DataError
from .explain import LEVELS, CandidateSet, SelectionTriple, enumerate_candidates, select_baseline_items, select_triple
from .mf import FactorModel, rank, train

BUNDLE_SCHEMA_VERSION = 1
SCORE_KINDS = ("cf", "cfa", "item-sim", "genre-jacc")


@dataclass
class ScoreRow:
    explanation_id: str
    user: int
    recommended_item: int
    items: tuple[int, ...]
    cf: float
    cfa: float
    item_sim: float
    genre_jacc: float
    labels: tuple[str, ...] = ()
    seconds: Mapping[str, float] = None

    def score(self, kind: str) -> float:
        return {"cf": self.cf, "cfa": self.cfa,
                "item-sim": self.item_sim, "genre-jacc": self.genre_jacc}[kind]


@dataclass
class PipelineResult:
    config: PipelineConfig
    history: SyntheticHistory
    materialized: InteractionDataset
    base_model: FactorModel
    recommended_item: int
    candidates: CandidateSet
    rows: list[ScoreRow]
    selections: dict[str, SelectionTriple]
    cf_traces: dict[str, tuple[float, ...]]
    cf_cfa_spearman: float
    bundle: dict


def explanation_id(expl: Explanation) -> str:
    return f"u{expl.user}-r{expl.recommended_item}-e" + "-".join(
        str(i) for i in expl.key())


def load_dataset(cfg: PipelineConfig) -> InteractionDataset:
    return load_movielens(cfg.ratings_path, cfg.movies_path,
                          rating_scale=(cfg.rating_min, cfg.rating_max))


# --- process-pool plumbing for the full retrains ---------------------------

_POOL_STATE: dict = {}


def _pool_init(dataset, config):
    _POOL_STATE["dataset"] = dataset
    _POOL_STATE["config"] = config


def _pool_retrain(expl: Explanation):
    dataset = _POOL_STATE["dataset"]
    config = _POOL_STATE["config"]
    start = time.perf_counter()
    model = cf_retrain(dataset, config, expl)
    context = build_context(dataset, model, expl)
    result = score_context(context, expl, FULL_RETRAIN)
    elapsed = time.perf_counter() - start
    return explanation_id(expl), result, model.objective_trace, elapsed


def _score_cf_all(dataset: InteractionDataset, candidates: CandidateSet,
                  cfg: PipelineConfig):
    """Full-retrain score per candidate; returns maps keyed by explanation id."""
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    results: dict[str, CfResult] = {}
    traces: dict[str, tuple[float, ...]] = {}
    seconds: dict[str, float] = {}
    train_config = cfg.train_config()
    if workers > 1 and len(candidates.candidates) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                                 initargs=(dataset, train_config)) as pool:
            for eid, result, trace, elapsed in pool.map(
                    _pool_retrain, candidates.candidates, chunksize=4):
                results[eid], traces[eid], seconds[eid] = result, trace, elapsed
    else:
        _pool_init(dataset, train_config)
        for expl in candidates.candidates:
            eid, result, trace, elapsed = _pool_retrain(expl)
            results[eid], traces[eid], seconds[eid] = result, trace, elapsed
    return results, traces, seconds


def score_candidates(dataset: InteractionDataset, base_model: FactorModel,
                     candidates: CandidateSet, cfg: PipelineConfig):
    """All four scores for every candidate explanation.

    The approximate score uses the provider named by `approx_strategy`;
    the exact score is always a full retrain.
    """
    cf_results, cf_traces, cf_seconds = _score_cf_all(dataset, candidates, cfg)
    rows: list[ScoreRow] = []
    train_config = cfg.train_config()
    for expl in candidates.candidates:
        eid = explanation_id(expl)

        start = time.perf_counter()
        if cfg.approx_strategy == WARM_START:
            approx_model = cf_finetune(base_model, dataset, expl, cfg.finetune_iterations)
        else:
            approx_model = cf_retrain(dataset, train_config, expl)
        approx = score_context(build_context(dataset, approx_model, expl),
                               expl, cfg.approx_strategy)
        cfa_sec = time.perf_counter() - start

        start = time.perf_counter()
        sim = baselines.item_sim(base_model, expl)
        sim_sec = time.perf_counter() - start

        start = time.perf_counter()
        jacc = baselines.genre_jacc(dataset.genres, expl)
        jacc_sec = time.perf_counter() - start

        rows.append(ScoreRow(
            explanation_id=eid,
            user=expl.user,
            recommended_item=expl.recommended_item,
            items=expl.key(),
            cf=cf_results[eid].score,
            cfa=approx.score,
            item_sim=sim,
            genre_jacc=jacc,
            seconds={"cf": cf_seconds[eid], "cfa": cfa_sec,
                     "item-sim": sim_sec, "genre-jacc": jacc_sec},
        ))
    rows.sort(key=lambda r: r.explanation_id)
    return rows, cf_traces


def _per_item_baseline_scores(base_model: FactorModel, dataset: InteractionDataset,
                              history: Sequence[int], recommended: int):
    sim_scores = {}
    jacc_scores = {}
    for item in history:
        single = Explanation(user=-1, recommended_item=recommended,
                             items=frozenset({item}))
        sim_scores[item] = baselines.item_sim(base_model, single)
        jacc_scores[item] = baselines.genre_jacc(dataset.genres, single)
    return sim_scores, jacc_scores


def run_generate(cfg: PipelineConfig, dataset: InteractionDataset) -> PipelineResult:
    """Run the whole survey-generation pipeline on one synthetic user."""
    hist = sample_history(dataset, cfg.history_size, cfg.popularity_quantile,
                          cfg.imputed_rating, cfg.history_seed)
    mat = materialize(dataset, hist)
    base_model = train(mat, cfg.train_config())

    interacted = mat.user_items(hist.user)
    base_candidates = frozenset(mat.items) - interacted
    recommended = rank(base_model, hist.user, base_candidates)[0][0]

    candidates = enumerate_candidates(hist.user, recommended, hist.history,
                                      cfg.explanation_size)
    rows, cf_traces = score_candidates(mat, base_model, candidates, cfg)
    by_key = {row.items: row for row in rows}
    expl_by_key = {expl.key(): expl for expl in candidates.candidates}

    selections: dict[str, SelectionTriple] = {}
    labels: dict[str, list[str]] = {row.explanation_id: [] for row in rows}

    # subset-level selection for the counterfactual scores
    for kind in ("cf", "cfa"):
        scored = [(expl_by_key[row.items], row.score(kind)) for row in rows]
        triple = select_triple(scored, score_kind=kind)
        selections[kind] = triple
        for level, expl in zip(LEVELS, (triple.high, triple.mean, triple.low)):
            labels[explanation_id(expl)].append(f"{kind}:{level}")

    # per-item selection for the baselines
    sim_scores, jacc_scores = _per_item_baseline_scores(
        base_model, mat, hist.history, recommended)
    for kind, per_item in (("item-sim", sim_scores), ("genre-jacc", jacc_scores)):
        picks = {}
        for level in LEVELS:
            key = select_baseline_items(hist.history, per_item,
                                        cfg.explanation_size, level)
            picks[level] = expl_by_key[key]
            labels[explanation_id(picks[level])].append(f"{kind}:{level}")
        selections[kind] = SelectionTriple(
            picks["high"], picks["mean"], picks["low"], kind,
            tuple(by_key[picks[lv].key()].score(kind) for lv in LEVELS))

    for row in rows:
        row.labels = tuple(labels[row.explanation_id])

    rho = spearman([row.cf for row in rows], [row.cfa for row in rows])

    bundle = _build_bundle(cfg, hist, recommended, candidates, selections,
                           by_key, rho)
    return PipelineResult(cfg, hist, mat, base_model, recommended, candidates,
                          rows, selections, cf_traces, rho, bundle)


def _build_bundle(cfg, hist, recommended, candidates, selections, by_key, rho):
    questions = []
    qnum = 0
    for kind in SCORE_KINDS:
        triple = selections[kind]
        for level, expl in zip(LEVELS, (triple.high, triple.mean, triple.low)):
            qnum += 1
            questions.append({
                "question_id": f"q{qnum:02d}",
                "score_kind": kind,
                "level": level,
                "explanation_id": explanation_id(expl),
                "items": list(expl.key()),
            })
    sel_block = {}
    for kind in SCORE_KINDS:
        triple = selections[kind]
        sel_block[kind] = {
            level: {
                "explanation_id": explanation_id(expl),
                "items": list(expl.key()),
                "scores": {k: by_key[expl.key()].score(k) for k in SCORE_KINDS},
            }
            for level, expl in zip(LEVELS, (triple.high, triple.mean, triple.low))
        }
    return {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "protocol": {
            "candidate_count": len(candidates.candidates),
            "embedding_dim": cfg.embedding_dim,
            "iterations": cfg.iterations,
            "popularity_quantile": cfg.popularity_quantile,
            "history_size": cfg.history_size,
            "explanation_size": cfg.explanation_size,
            "finetune_iterations": cfg.finetune_iterations,
            "approx_strategy": cfg.approx_strategy,
            "question_count": len(questions),
        },
        "history": {
            "user": hist.user,
            "items": list(hist.history),
            "imputed_rating": hist.imputed_rating,
            "seed": hist.seed,
        },
        "recommended_item": recommended,
        "selections": sel_block,
        "questions": questions,
        "cf_cfa_spearman": rho,
    }


# --- serialization ---------------------------------------------------------

SCORE_REPORT_HEADER = (
    "explanation_id,user,recommended_item,items,cf,cfa,item_sim,genre_jacc,"
    "labels,cf_seconds,cfa_seconds,item_sim_seconds,genre_jacc_seconds")


def score_report_csv(rows: Sequence[ScoreRow]) -> str:
    lines = [SCORE_REPORT_HEADER]
    for r in rows:
        lines.append(",".join([
            r.explanation_id,
            str(r.user),
            str(r.recommended_item),
            ";".join(str(i) for i in r.items),
            repr(r.cf), repr(r.cfa), repr(r.item_sim), repr(r.genre_jacc),
            ";".join(r.labels),
            f"{r.seconds['cf']:.6f}", f"{r.seconds['cfa']:.6f}",
            f"{r.seconds['item-sim']:.6f}", f"{r.seconds['genre-jacc']:.6f}",
        ]))
    return "\n".join(lines) + "\n"


def load_score_report_csv(path):
    """Read back a score report: (scores, labels) maps keyed by explanation id."""
    scores: dict[str, dict[str, float]] = {}
    labels: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != SCORE_REPORT_HEADER:
            raise DataError(f"{path}: unexpected score report header")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 13:
                raise DataError(f"{path}: bad score report row: {line!r}")
            eid = parts[0]
            scores[eid] = {"cf": float(parts[4]), "cfa": float(parts[5]),
                           "item-sim": float(parts[6]), "genre-jacc": float(parts[7])}
            labels[eid] = [lab for lab in parts[8].split(";") if lab]
    return scores, labels


def bundle_json(bundle: dict) -> str:
    return json.dumps(bundle, sort_keys=True, indent=2) + "\n"
