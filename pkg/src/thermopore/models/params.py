"""Hyperparameter records for the six classifier families."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

KINDS = ("knn", "dt", "rf", "lr", "adaboost", "mlp")


@dataclass(frozen=True)
class KnnParams:
    k: int = 5


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None  # None = grow until pure
    min_split: int = 2


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: int | str = "sqrt"  # "sqrt" -> ceil(sqrt(d)); int -> that many
    bootstrap: bool = True
    max_depth: int | None = None
    min_split: int = 2

    def resolve_max_features(self, d):
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        if self.max_features == "all":
            return d
        return max(1, min(int(self.max_features), d))


@dataclass(frozen=True)
class LogRegParams:
    l2: float = 1e-4
    max_iter: int = 1000
    tol: float = 1e-6


@dataclass(frozen=True)
class AdaBoostParams:
    n_rounds: int = 50


@dataclass(frozen=True)
class MlpParams:
    hidden: tuple = (64, 64)
    epochs: int = 100
    batch: int = 256
    step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class Hyperparams:
    knn: KnnParams = field(default_factory=KnnParams)
    dt: TreeParams = field(default_factory=TreeParams)
    rf: ForestParams = field(default_factory=ForestParams)
    lr: LogRegParams = field(default_factory=LogRegParams)
    adaboost: AdaBoostParams = field(default_factory=AdaBoostParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    threshold: float = 0.5

    def for_kind(self, kind):
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
        return getattr(self, kind)

    def with_overrides(self, kind, **values):
        """Copy with some fields of one family replaced."""
        current = self.for_kind(kind)
        names = {f.name for f in fields(current)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown {kind} hyperparameters: {sorted(unknown)}")
        return replace(self, **{kind: replace(current, **values)})

    def to_dict(self):
        return asdict(self)
