from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    pass


def derive_seeds(seed, n, *tags):
    """``n`` independent 63-bit seeds from a master seed and optional
    integer tags (fixed SeedSequence rule)."""
    ss = np.random.SeedSequence([int(seed) & (2 ** 63 - 1), *[int(t) for t in tags]])
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64) >> np.uint64(1)]


def check_binary(X, y, kind, allow_single_class=False):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError(f"{kind}: need a non-empty 2D feature matrix")
    if y.shape != (X.shape[0],):
        raise TrainingError(f"{kind}: label vector length {y.shape} != {X.shape[0]} rows")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError(f"{kind}: labels must be 0/1")
    if not allow_single_class and np.unique(y).size < 2:
        raise TrainingError(f"{kind}: both classes must be present in training data")
    return X, y.astype(np.int64)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Classifier:
    """Common scoring contract: ``score`` in [0, 1], ``predict`` thresholds it."""

    kind = None

    def __init__(self, n_features, seed):
        self.n_features = int(n_features)
        self.seed = int(seed)

    def score(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"{self.kind}: expected {self.n_features} features, got shape {X.shape}")
        return self._score(X)

    def predict(self, X, threshold=0.5):
        return (self.score(X) >= threshold).astype(np.int8)

    def _score(self, X):
        raise NotImplementedError

    def state(self):
        """Fitted arrays, for serialisation."""
        raise NotImplementedError
