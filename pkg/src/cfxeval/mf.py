"""Matrix factorization trained by alternating least squares.

One iteration is a full sweep: solve every user row with item factors
fixed, then every item row with user factors fixed. Each row solve is a
closed-form ridge regression, so the regularized objective

    sum over (u, i) of (r_ui - p_u . q_i)^2
    + reg * (sum_u ||p_u||^2 + sum_i ||q_i||^2)

can never increase across half-sweeps. Training is fully deterministic
given (dataset, config): initialization is a seeded uniform draw and all
accumulation orders are fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import InteractionDataset
from .errors import DataError, NumericalError

CHECKPOINT_MAGIC = b"CFXMF1\n"


@dataclass(frozen=True)
class TrainConfig:
    embedding_dim: int = 40
    iterations: int = 20
    regularization: float = 0.05
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise DataError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.iterations < 1:
            raise DataError(f"iterations must be >= 1, got {self.iterations}")
        if not self.regularization > 0:
            raise DataError(f"regularization must be > 0, got {self.regularization}")
        if not self.init_scale > 0:
            raise DataError(f"init_scale must be > 0, got {self.init_scale}")

    def to_dict(self) -> dict:
        return {
            "embedding_dim": self.embedding_dim,
            "iterations": self.iterations,
            "regularization": self.regularization,
            "init_scale": self.init_scale,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Trained factors plus the config that produced them.

    `objective_trace` holds the regularized objective before training and
    after every half-sweep (initial + 2 * iterations entries).
    """

    user_ids: tuple[int, ...]
    item_ids: tuple[int, ...]
    user_factors: np.ndarray
    item_factors: np.ndarray
    config: TrainConfig
    objective_trace: tuple[float, ...] = ()

    def __post_init__(self):
        d = self.config.embedding_dim
        if self.user_factors.shape != (len(self.user_ids), d):
            raise DataError("user factor matrix shape mismatch")
        if self.item_factors.shape != (len(self.item_ids), d):
            raise DataError("item factor matrix shape mismatch")

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def user_index(self, user: int) -> int:
        idx = self._user_pos().get(user)
        if idx is None:
            raise DataError(f"unknown user {user}")
        return idx

    def item_index(self, item: int) -> int:
        idx = self._item_pos().get(item)
        if idx is None:
            raise DataError(f"unknown item {item}")
        return idx

    def _user_pos(self) -> dict:
        cache = self.__dict__.get("_user_pos_cache")
        if cache is None:
            cache = {uid: k for k, uid in enumerate(self.user_ids)}
            object.__setattr__(self, "_user_pos_cache", cache)
        return cache

    def _item_pos(self) -> dict:
        cache = self.__dict__.get("_item_pos_cache")
        if cache is None:
            cache = {iid: k for k, iid in enumerate(self.item_ids)}
            object.__setattr__(self, "_item_pos_cache", cache)
        return cache

    def user_factor(self, user: int) -> np.ndarray:
        return self.user_factors[self.user_index(user)]

    def item_factor(self, item: int) -> np.ndarray:
        return self.item_factors[self.item_index(item)]


def _groups(idx: np.ndarray, n_rows: int):
    """CSR-style grouping of interaction indices by row id."""
    order = np.argsort(idx, kind="stable")
    ptr = np.searchsorted(idx[order], np.arange(n_rows + 1))
    return order, ptr


def _half_sweep(fixed: np.ndarray, n_rows: int, order: np.ndarray, ptr: np.ndarray,
                other_ix: np.ndarray, ratings: np.ndarray, reg: float, d: int) -> np.ndarray:
    A = np.empty((n_rows, d, d))
    B = np.zeros((n_rows, d))
    eye = reg * np.eye(d)
    for row in range(n_rows):
        sl = order[ptr[row]:ptr[row + 1]]
        if sl.size == 0:
            # no observations: ridge argmin is the zero vector
            A[row] = eye
            continue
        Q = fixed[other_ix[sl]]
        A[row] = Q.T @ Q + eye
        B[row] = Q.T @ ratings[sl]
    return np.linalg.solve(A, B[..., None])[..., 0]


def _objective(P, Q, u_ix, i_ix, ratings, reg) -> float:
    pred = np.einsum("nd,nd->n", P[u_ix], Q[i_ix])
    sse = float(np.sum((ratings - pred) ** 2))
    return sse + reg * (float(np.sum(P * P)) + float(np.sum(Q * Q)))


def train(dataset: InteractionDataset, config: TrainConfig) -> FactorModel:
    """Fit user and item factors by ALS."""
    if dataset.n_interactions == 0:
        raise DataError("cannot train on a dataset with no interactions")
    d = config.embedding_dim
    reg = config.regularization
    users, items = dataset.users, dataset.items
    upos = {u: k for k, u in enumerate(users)}
    ipos = {i: k for k, i in enumerate(items)}
    u_ix = np.fromiter((upos[row.user] for row in dataset.interactions), dtype=np.int64)
    i_ix = np.fromiter((ipos[row.item] for row in dataset.interactions), dtype=np.int64)
    ratings = np.fromiter((row.rating for row in dataset.interactions), dtype=np.float64)

    rng = np.random.default_rng(config.seed)
    P = rng.uniform(-config.init_scale, config.init_scale, (len(users), d))
    Q = rng.uniform(-config.init_scale, config.init_scale, (len(items), d))

    u_order, u_ptr = _groups(u_ix, len(users))
    i_order, i_ptr = _groups(i_ix, len(items))

    trace = [_objective(P, Q, u_ix, i_ix, ratings, reg)]
    for it in range(config.iterations):
        P = _half_sweep(Q, len(users), u_order, u_ptr, i_ix, ratings, reg, d)
        if not np.all(np.isfinite(P)):
            raise NumericalError(f"non-finite user factors at iteration {it + 1}")
        trace.append(_objective(P, Q, u_ix, i_ix, ratings, reg))
        Q = _half_sweep(P, len(items), i_order, i_ptr, u_ix, ratings, reg, d)
        if not np.all(np.isfinite(Q)):
            raise NumericalError(f"non-finite item factors at iteration {it + 1}")
        trace.append(_objective(P, Q, u_ix, i_ix, ratings, reg))

    for prev, cur in zip(trace, trace[1:]):
        if cur > prev * (1 + 1e-9) + 1e-9:
            raise NumericalError(
                f"objective increased across a half-sweep: {prev} -> {cur}")

    return FactorModel(users, items, P, Q, config, tuple(trace))


def predict(model: FactorModel, user: int, item: int) -> float:
    """Dot product of the user and item factor vectors."""
    return float(model.user_factor(user) @ model.item_factor(item))


def rank(model: FactorModel, user: int, candidates) -> list[tuple[int, float]]:
    """Candidates sorted by predicted score descending, ties by ascending id."""
    cand = sorted(candidates)
    if not cand:
        raise DataError("candidate set is empty")
    p = model.user_factor(user)
    rows = np.array([model.item_index(i) for i in cand])
    scores = model.item_factors[rows] @ p
    order = sorted(range(len(cand)), key=lambda k: (-scores[k], cand[k]))
    return [(cand[k], float(scores[k])) for k in order]


def normalize_scores(scores: Sequence[float]) -> list[float]:
    """Min-max rescale into [0, 1]; an all-equal input maps to 0.5 everywhere."""
    if len(scores) == 0:
        raise DataError("cannot normalize an empty score list")
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("non-finite value in scores to normalize")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return [0.5] * len(scores)
    return [float(v) for v in (arr - lo) / (hi - lo)]


def fold_in_user(model: FactorModel, history: Sequence[tuple[int, float]],
                 reg: float) -> np.ndarray:
    """Closed-form ridge solve of one user vector against fixed item factors.

    With reg = 0 the minimum-norm least-squares solution is returned.
    """
    if not history:
        raise DataError("fold-in requires a nonempty history")
    rows = np.array([model.item_index(item) for item, _ in history])
    Q = model.item_factors[rows]
    r = np.array([rating for _, rating in history], dtype=np.float64)
    d = model.embedding_dim
    if reg > 0:
        try:
            p = np.linalg.solve(Q.T @ Q + reg * np.eye(d), Q.T @ r)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular normal equations in fold-in: {exc}") from None
    else:
        p = np.linalg.lstsq(Q, r, rcond=None)[0]
    if not np.all(np.isfinite(p)):
        raise NumericalError("non-finite fold-in solution")
    return p


def save_checkpoint(model: FactorModel, path) -> None:
    """Binary checkpoint: magic, one JSON header line, then row-major
    float64 user factors followed by item factors. Round-trips bit-exactly."""
    header = {
        "format_version": 1,
        "embedding_dim": model.embedding_dim,
        "n_users": len(model.user_ids),
        "n_items": len(model.item_ids),
        "config": model.config.to_dict(),
        "user_ids": list(model.user_ids),
        "item_ids": list(model.item_ids),
        "objective_trace": list(model.objective_trace),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.user_factors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.item_factors, dtype="<f8").tobytes())


def load_checkpoint(path) -> FactorModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a factor-model checkpoint")
        header = json.loads(fh.readline().decode())
        d = header["embedding_dim"]
        nu, ni = header["n_users"], header["n_items"]
        raw = fh.read()
    expected = (nu + ni) * d * 8
    if len(raw) != expected:
        raise DataError(f"{path}: truncated checkpoint ({len(raw)} != {expected} bytes)")
    flat = np.frombuffer(raw, dtype="<f8")
    P = flat[:nu * d].reshape(nu, d).copy()
    Q = flat[nu * d:].reshape(ni, d).copy()
    return FactorModel(
        tuple(header["user_ids"]), tuple(header["item_ids"]), P, Q,
        TrainConfig(**header["config"]), tuple(header["objective_trace"]))
