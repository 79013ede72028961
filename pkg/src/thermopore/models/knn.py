from __future__ import annotations

import numpy as np

from .base import Classifier, check_binary


class KNearestNeighbors(Classifier):
    """Score = fraction of positives among the ``k`` nearest training rows
    (Euclidean; equal distances resolved towards the lower training index)."""

    kind = "knn"

    def __init__(self, X, y, n_features, params, seed, chunk=256):
        super().__init__(n_features, seed)
        self.X = X
        self.y = y
        self.params = params
        self.chunk = chunk
        self._sq = (X * X).sum(axis=1)

    @classmethod
    def fit(cls, X, y, params, seed=0):
        X, y = check_binary(X, y, "knn", allow_single_class=True)
        if params.k < 1:
            raise ValueError("k must be >= 1")
        return cls(X.copy(), y.astype(np.int8), X.shape[1], params, seed)

    def _score(self, X):
        k = min(self.params.k, len(self.y))
        out = np.empty(X.shape[0])
        yf = self.y.astype(float)
        for s in range(0, X.shape[0], self.chunk):
            q = X[s:s + self.chunk]
            d = (q * q).sum(1)[:, None] + self._sq[None, :] - 2.0 * (q @ self.X.T)
            np.maximum(d, 0.0, out=d)
            kth = np.partition(d, k - 1, axis=1)[:, k - 1:k]
            closer = d < kth
            tied = d == kth
            # fill the remaining slots from the tied set in index order
            room = k - closer.sum(axis=1, keepdims=True)
            take = tied & (np.cumsum(tied, axis=1) <= room)
            sel = closer | take
            out[s:s + self.chunk] = (sel * yf).sum(axis=1) / k
        return out

    def state(self):
        return {"X": self.X, "y": self.y}

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        return cls(arrays["X"], arrays["y"], n_features, params, seed)
