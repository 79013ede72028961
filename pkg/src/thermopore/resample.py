"""Borderline-SMOTE (variant 1) oversampling to a 1:1 class balance."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

SAFE, DANGER, NOISE = "safe", "danger", "noise"


@dataclass(frozen=True)
class SmoteConfig:
    m: int = 10
    k_syn: int = 5
    seed: int = 0
    variant: str = "borderline-1"

    def __post_init__(self):
        if self.m < 1 or self.k_syn < 1:
            raise ValueError("m and k_syn must be >= 1")
        if self.variant != "borderline-1":
            raise ValueError(f"unsupported SMOTE variant {self.variant!r}")


@dataclass
class SmoteLog:
    """One entry per synthetic row: ``s = X[p] + r * (X[q] - X[p])``."""

    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("p,q,r\n")
            for p, q, r in zip(self.p.tolist(), self.q.tolist(), self.r.tolist()):
                fh.write(f"{p},{q},{r!r}\n")


def _sq_dist(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def nearest_neighbors(queries, ref, k, self_index=None, chunk=512):
    """Indices of the ``k`` nearest rows of ``ref`` for each query row,
    ordered by distance then row index.

    ``self_index[i]`` (if given) is the row of ``ref`` to skip for query i.
    """
    queries = np.asarray(queries, dtype=float)
    ref = np.asarray(ref, dtype=float)
    out = np.empty((len(queries), k), dtype=np.int64)
    for start in range(0, len(queries), chunk):
        d = _sq_dist(queries[start:start + chunk], ref)
        rows = np.arange(d.shape[0])
        if self_index is not None:
            d[rows, self_index[start:start + chunk]] = np.inf
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for i in rows:
            cand = np.flatnonzero(d[i] <= kth[i])
            order = np.lexsort((cand, d[i, cand]))
            out[start + i] = cand[order[:k]]
    return out


def _classes(y):
    y = np.asarray(y)
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n0 == 0 or n1 == 0:
        raise ValueError("both classes must be present")
    minority = 1 if n1 <= n0 else 0
    return minority, min(n0, n1), max(n0, n1)


def classify_minority(X, y, m):
    """Tag each minority row safe/danger/noise from the majority count
    among its ``m`` nearest neighbours in the full set.

    Returns
    -------
    minority_rows : ndarray of int
    tags : list of str
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    minority, _, _ = _classes(y)
    if not 1 <= m < len(y):
        raise ValueError(f"m must satisfy 1 <= m < {len(y)}")
    rows = np.flatnonzero(y == minority)
    nn = nearest_neighbors(X[rows], X, m, self_index=rows)
    n_major = (y[nn] != minority).sum(axis=1)
    tags = [tag_from_count(int(c), m) for c in n_major]
    return rows, tags


def tag_from_count(majority_count, m):
    if majority_count == m:
        return NOISE
    if m / 2 <= majority_count < m:
        return DANGER
    return SAFE


def borderline_smote(X, y, cfg=SmoteConfig(), return_log=False):
    """Append synthetic minority rows until both classes have equal counts.

    Seeds are the danger-tagged minority rows, visited round-robin; each
    synthetic row interpolates towards one of the seed's ``k_syn`` nearest
    minority neighbours. Original rows come first and are unchanged.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise ValueError("no minority rows")
    minority, n_min, n_maj = _classes(y)
    empty_log = SmoteLog(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    need = n_maj - n_min
    if need == 0:
        return (X.copy(), y.copy(), empty_log) if return_log else (X.copy(), y.copy())
    if n_min < 2:
        raise ValueError("need at least two minority rows to synthesise")

    m = min(cfg.m, len(y) - 1)
    rows, tags = classify_minority(X, y, m)
    tags = np.array(tags)
    seeds = rows[tags == DANGER]
    if seeds.size == 0:
        seeds = rows[tags != NOISE]
        if seeds.size == 0:
            seeds = rows
        log.warning("no danger samples; falling back to plain SMOTE over %d minority rows",
                    seeds.size)

    k_syn = min(cfg.k_syn, n_min - 1)
    seed_pos = np.searchsorted(rows, seeds)
    nn = nearest_neighbors(X[seeds], X[rows], k_syn, self_index=seed_pos)

    rng = np.random.default_rng(cfg.seed)
    which = np.arange(need) % seeds.size
    pick = rng.integers(0, k_syn, size=need)
    r = rng.random(need)
    r[r == 0.0] = 0.5  # keep r strictly inside (0, 1)
    p = seeds[which]
    q = rows[nn[which, pick]]
    synth = X[p] + r[:, None] * (X[q] - X[p])
    X_out = np.vstack([X, synth])
    y_out = np.concatenate([y, np.full(need, minority, dtype=y.dtype)])
    if return_log:
        return X_out, y_out, SmoteLog(p, q, r)
    return X_out, y_out
