"""Discrete AdaBoost with depth-1 stumps.

A stump votes ``polarity`` when ``x[feature] > threshold`` and
``-polarity`` otherwise.
"""

from __future__ import annotations

import numpy as np

from .base import Classifier, check_binary, sigmoid


def fit_stump(wpos, wneg, valid, thresholds):
    """Weighted best stump over all features.

    All arrays are in per-feature sorted order: ``wpos``/``wneg`` hold the
    weights of positive/negative rows, ``thresholds[i, f]`` is the midpoint
    between sorted rows i and i+1 and ``valid`` flags distinct neighbours.
    Returns ``(feature, threshold, polarity, weighted_error)``.
    """
    cpos = np.cumsum(wpos, axis=0)[:-1]
    cneg = np.cumsum(wneg, axis=0)[:-1]
    tot_neg = wneg.sum(axis=0)
    tot = wpos.sum(axis=0) + tot_neg
    # polarity +1: left (<= t) predicted -1
    err_plus = cpos + (tot_neg - cneg)
    err_minus = tot - err_plus
    err = np.stack([err_plus, err_minus], axis=-1)  # (n-1, d, 2)
    err = np.where(valid[..., None], err, np.inf)
    flat = np.transpose(err, (1, 0, 2)).reshape(-1)  # feature, threshold, polarity
    best = int(np.argmin(flat))
    n_thr = err.shape[0]
    f, rest = divmod(best, n_thr * 2)
    i, pol = divmod(rest, 2)
    return f, thresholds[i, f], 1 if pol == 0 else -1, flat[best]


class AdaBoost(Classifier):
    kind = "adaboost"

    def __init__(self, features, thresholds, polarities, alphas, n_features, params, seed):
        super().__init__(n_features, seed)
        self.features = np.asarray(features, dtype=np.int64)
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.polarities = np.asarray(polarities, dtype=np.int64)
        self.alphas = np.asarray(alphas, dtype=float)
        self.params = params

    @classmethod
    def fit(cls, X, y, params, seed=0):
        X, y = check_binary(X, y, "adaboost")
        n, d = X.shape
        ypm = np.where(y == 1, 1.0, -1.0)
        order = np.argsort(X, axis=0, kind="stable")
        Xs = np.take_along_axis(X, order, axis=0)
        valid = Xs[:-1] < Xs[1:]
        thresholds = 0.5 * (Xs[:-1] + Xs[1:])
        thresholds = np.where(thresholds == Xs[1:], Xs[:-1], thresholds)
        is_pos = (y == 1)[order]
        if not valid.any():
            raise ValueError("adaboost: every feature is constant")

        w = np.full(n, 1.0 / n)

        feats, thrs, pols, alphas = [], [], [], []
        for _ in range(params.n_rounds):
            ws = w[order]
            f, t, pol, err = fit_stump(ws * is_pos, ws * ~is_pos, valid, thresholds)
            if err >= 0.5:
                break
            err = max(err, 1e-10)
            alpha = 0.5 * np.log((1.0 - err) / err)
            h = np.where(X[:, f] > t, pol, -pol)
            w = w * np.exp(-alpha * ypm * h)
            w /= w.sum()
            feats.append(f)
            thrs.append(t)
            pols.append(pol)
            alphas.append(alpha)
            if err <= 1e-10:
                break
        return cls(feats, thrs, pols, alphas, d, params, seed)

    def margin(self, X):
        F = np.zeros(X.shape[0])
        for f, t, pol, a in zip(self.features, self.thresholds, self.polarities, self.alphas):
            F += a * np.where(X[:, f] > t, pol, -pol)
        return F

    def _score(self, X):
        return sigmoid(self.margin(X))

    def state(self):
        return {"features": self.features, "thresholds": self.thresholds,
                "polarities": self.polarities, "alphas": self.alphas}

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        return cls(arrays["features"], arrays["thresholds"], arrays["polarities"],
                   arrays["alphas"], n_features, params, seed)
