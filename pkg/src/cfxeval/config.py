"""Pipeline configuration: a plain `key = value` text format validated
against a fixed schema. Unknown keys are errors so typos cannot silently
change an experiment."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from typing import Any

from .errors import ConfigError
from .mf import TrainConfig


@dataclass(frozen=True)
class PipelineConfig:
    ratings_path: str
    movies_path: str
    embedding_dim: int = 40
    iterations: int = 20
    regularization: float = 0.05
    init_scale: float = 0.1
    train_seed: int = 0
    history_seed: int = 0
    split_seed: int = 0
    history_size: int = 9
    popularity_quantile: float = 0.9
    explanation_size: int = 3
    imputed_rating: float = 4.0
    finetune_iterations: int = 5
    approx_strategy: str = "warm-start-finetune"
    workers: int = 0
    rating_min: float = 0.5
    rating_max: float = 5.0
    split_fraction: float = 0.7

    def __post_init__(self):
        if self.approx_strategy not in ("warm-start-finetune", "full-retrain"):
            raise ConfigError(
                f"approx_strategy must be 'warm-start-finetune' or 'full-retrain', "
                f"got {self.approx_strategy!r}")
        if not 0.0 <= self.popularity_quantile <= 1.0:
            raise ConfigError(f"popularity_quantile {self.popularity_quantile} outside [0, 1]")
        if self.history_size < 1:
            raise ConfigError("history_size must be >= 1")
        if self.explanation_size < 1 or self.explanation_size > self.history_size:
            raise ConfigError("explanation_size must be in 1..history_size")
        if self.finetune_iterations < 1:
            raise ConfigError("finetune_iterations must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must be in (0, 1)")
        if not self.rating_min < self.rating_max:
            raise ConfigError("rating_min must be below rating_max")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            embedding_dim=self.embedding_dim,
            iterations=self.iterations,
            regularization=self.regularization,
            init_scale=self.init_scale,
            seed=self.train_seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
_REQUIRED = ("ratings_path", "movies_path")


def _coerce(key: str, raw: str) -> Any:
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def parse_config(path) -> PipelineConfig:
    """Read a `key = value` config file (# starts a comment)."""
    values: dict[str, Any] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = _coerce(key, raw)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"{path}: missing required key {key!r}")
    return PipelineConfig(**values)


def config_hash(cfg: PipelineConfig) -> str:
    """Short stable digest used to version output directories."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
