"""Fully connected network: ReLU hidden layers, sigmoid output, binary
cross-entropy, trained by mini-batch Adam."""

from __future__ import annotations

import numpy as np

from .base import Classifier, check_binary, sigmoid


def init_params(sizes, rng):
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X):
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for li in range(n_layers):
        z = h @ params[2 * li] + params[2 * li + 1]
        h = np.maximum(z, 0.0) if li < n_layers - 1 else z
        acts.append(h)
    return acts  # last entry is the output logit, shape (n, 1)


def loss_and_grad(params, X, y):
    """Mean binary cross-entropy and its gradient w.r.t. every parameter."""
    acts = forward(params, X)
    logit = acts[-1][:, 0]
    n = X.shape[0]
    loss = np.mean(np.logaddexp(0.0, logit) - y * logit)
    delta = ((sigmoid(logit) - y) / n)[:, None]
    grads = [None] * len(params)
    n_layers = len(params) // 2
    for li in range(n_layers - 1, -1, -1):
        grads[2 * li] = acts[li].T @ delta
        grads[2 * li + 1] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ params[2 * li].T) * (acts[li] > 0)
    return loss, grads


class MLP(Classifier):
    kind = "mlp"

    def __init__(self, params_list, n_features, params, seed, history=None):
        super().__init__(n_features, seed)
        self.weights = params_list
        self.params = params
        self.history = history or []

    @classmethod
    def fit(cls, X, y, params, seed=0):
        X, y = check_binary(X, y, "mlp")
        y = y.astype(float)
        n, d = X.shape
        rng = np.random.default_rng(seed)
        sizes = [d, *params.hidden, 1]
        w = init_params(sizes, rng)
        m = [np.zeros_like(p) for p in w]
        v = [np.zeros_like(p) for p in w]
        b1, b2, eps = params.beta1, params.beta2, params.eps
        t = 0
        history = []
        for _ in range(params.epochs):
            perm = rng.permutation(n)
            total = 0.0
            for s in range(0, n, params.batch):
                rows = perm[s:s + params.batch]
                loss, grads = loss_and_grad(w, X[rows], y[rows])
                total += loss * rows.size
                t += 1
                for i, g in enumerate(grads):
                    m[i] = b1 * m[i] + (1 - b1) * g
                    v[i] = b2 * v[i] + (1 - b2) * g * g
                    mh = m[i] / (1 - b1 ** t)
                    vh = v[i] / (1 - b2 ** t)
                    w[i] = w[i] - params.step * mh / (np.sqrt(vh) + eps)
            history.append(total / n)
        return cls(w, d, params, seed, history)

    def _score(self, X):
        return sigmoid(forward(self.weights, X)[-1][:, 0])

    def state(self):
        return {f"p{i}": p for i, p in enumerate(self.weights)}

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        n = len([k for k in arrays if k.startswith("p")])
        return cls([arrays[f"p{i}"] for i in range(n)], n_features, params, seed)
