from __future__ import annotations

import numpy as np

from .base import Classifier, check_binary, sigmoid


def logloss_grad(w, b, X, y, l2):
    """Mean log loss plus ``l2/2 * |w|^2`` and its gradient (bias unpenalised)."""
    z = X @ w + b
    p = sigmoid(z)
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (p - y) / len(y)
    return loss, X.T @ r + l2 * w, r.sum()


class LogisticRegression(Classifier):
    kind = "lr"

    def __init__(self, w, b, n_features, params, seed, n_iter=0):
        super().__init__(n_features, seed)
        self.w = w
        self.b = float(b)
        self.params = params
        self.n_iter = n_iter

    @classmethod
    def fit(cls, X, y, params, seed=0):
        """Full-batch gradient descent with step ``1/L`` (``L`` the gradient
        Lipschitz bound) until the largest gradient entry drops below ``tol``."""
        X, y = check_binary(X, y, "lr")
        n, d = X.shape
        y = y.astype(float)
        Xb = np.hstack([X, np.ones((n, 1))])
        lip = 0.25 * np.linalg.norm(Xb, 2) ** 2 / n + params.l2
        step = 1.0 / lip
        w = np.zeros(d)
        b = 0.0
        it = 0
        for it in range(1, params.max_iter + 1):
            _, gw, gb = logloss_grad(w, b, X, y, params.l2)
            if max(np.abs(gw).max(initial=0.0), abs(gb)) < params.tol:
                break
            w -= step * gw
            b -= step * gb
        return cls(w, b, d, params, seed, it)

    def _score(self, X):
        return sigmoid(X @ self.w + self.b)

    def state(self):
        return {"w": self.w, "b": np.array([self.b])}

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        return cls(arrays["w"], arrays["b"][0], n_features, params, seed)
