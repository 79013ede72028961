"""Six classifier families behind one train/score/predict contract."""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .base import Classifier, TrainingError, derive_seeds
from .boosting import AdaBoost
from .knn import KNearestNeighbors
from .linear import LogisticRegression
from .mlp import MLP
from .params import (KINDS, AdaBoostParams, ForestParams, Hyperparams, KnnParams,
                     LogRegParams, MlpParams, TreeParams)
from .tree import DecisionTree, RandomForest

FAMILIES = {
    "knn": (KNearestNeighbors, KnnParams),
    "dt": (DecisionTree, TreeParams),
    "rf": (RandomForest, ForestParams),
    "lr": (LogisticRegression, LogRegParams),
    "adaboost": (AdaBoost, AdaBoostParams),
    "mlp": (MLP, MlpParams),
}

DISPLAY_NAMES = {"knn": "KNN", "rf": "RF", "dt": "DT", "mlp": "MLP", "lr": "LR",
                 "adaboost": "AdaBoost"}

FORMAT_VERSION = 1


def train(kind, hp, X, y, seed=0, workers=1):
    """Fit one model family. Deterministic in ``(kind, hp, X, y, seed)``."""
    if kind not in FAMILIES:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    cls = FAMILIES[kind][0]
    params = hp.for_kind(kind)
    if kind == "rf":
        return cls.fit(X, y, params, seed, workers=workers)
    return cls.fit(X, y, params, seed)


def score(model, X):
    return model.score(X)


def predict(model, X, threshold=0.5):
    return model.predict(X, threshold)


def gini_importances(model):
    if not isinstance(model, RandomForest):
        raise ValueError(f"Gini importances need a random forest, got {model.kind!r}")
    return model.gini_importances()


def save_model(model, path):
    """Write an ``.npz`` archive: fitted arrays plus a JSON ``__meta__``
    entry holding format version, family tag, hyperparameters and seed."""
    meta = {"format_version": FORMAT_VERSION, "kind": model.kind,
            "n_features": model.n_features, "seed": model.seed,
            "params": asdict(model.params)}
    arrays = dict(model.state())
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(arrays.pop("__meta__").tobytes().decode())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {meta.get('format_version')}")
    cls, pcls = FAMILIES[meta["kind"]]
    raw = meta["params"]
    if meta["kind"] == "mlp":
        raw["hidden"] = tuple(raw["hidden"])
    return cls.from_state(arrays, meta["n_features"], pcls(**raw), meta["seed"])


__all__ = [
    "AdaBoost", "Classifier", "DecisionTree", "FAMILIES", "Hyperparams", "KINDS",
    "KNearestNeighbors", "LogisticRegression", "MLP", "RandomForest", "TrainingError",
    "derive_seeds", "gini_importances", "load_model", "predict", "save_model", "score", "train",
]
