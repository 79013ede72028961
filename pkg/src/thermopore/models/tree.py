"""CART decision trees and random forests with Gini impurity.

Splits send ``x <= threshold`` left. Candidate thresholds are midpoints of
consecutive distinct values; equal impurity decreases go to the lowest
feature index, then the lowest threshold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

from .base import Classifier, check_binary, derive_seeds

LEAF = -1


@numba.njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, feats, n_eval, g_parent, n_pos):
    """Scan features in ``feats`` order; stop after ``n_eval`` non-constant
    ones. Returns (feature, threshold, gain, found)."""
    m = end - start
    best_f = -1
    best_t = 0.0
    best_gain = -np.inf
    evaluated = 0
    vals = np.empty(m)
    labs = np.empty(m, dtype=np.int64)
    for fi in range(feats.size):
        if evaluated >= n_eval:
            break
        f = feats[fi]
        for i in range(m):
            vals[i] = X[idx[start + i], f]
        order = np.argsort(vals)
        if vals[order[0]] == vals[order[m - 1]]:
            continue
        evaluated += 1
        for i in range(m):
            labs[i] = y[idx[start + order[i]]]
        left_pos = 0
        for i in range(m - 1):
            left_pos += labs[i]
            v0 = vals[order[i]]
            v1 = vals[order[i + 1]]
            if v0 == v1:
                continue
            nl = i + 1
            nr = m - nl
            pl = left_pos / nl
            pr = (n_pos - left_pos) / nr
            gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
            gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
            gain = g_parent - (nl / m) * gl - (nr / m) * gr
            t = 0.5 * (v0 + v1)
            if t == v1:
                t = v0
            if (gain > best_gain or (gain == best_gain and
                                     (f < best_f or (f == best_f and t < best_t)))):
                best_gain = gain
                best_f = f
                best_t = t
    return best_f, best_t, best_gain, best_f >= 0


@numba.njit(cache=True, nogil=True)
def _grow(X, y, sample_idx, max_features, max_depth, min_split, seed):
    np.random.seed(seed)
    n_total = sample_idx.size
    d = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    n_node = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)

    idx = sample_idx.copy()
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_total
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    all_feats = np.arange(d)
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        n_pos = 0
        for i in range(start, end):
            n_pos += y[idx[i]]
        p = n_pos / m
        value[node] = p
        n_node[node] = m
        if m < min_split or n_pos == 0 or n_pos == m or (max_depth >= 0 and depth >= max_depth):
            continue
        if max_features >= d:
            feats = all_feats
        else:
            feats = np.random.permutation(d)
        g_parent = 1.0 - p * p - (1.0 - p) * (1.0 - p)
        f, t, g, found = _best_split(X, y, idx, start, end, feats, max_features, g_parent, n_pos)
        if not found:
            continue
        # partition idx[start:end] by x <= t, stable within each side
        buf = np.empty(m, dtype=np.int64)
        nl = 0
        for i in range(start, end):
            if X[idx[i], f] <= t:
                buf[nl] = idx[i]
                nl += 1
        j = nl
        for i in range(start, end):
            if X[idx[i], f] > t:
                buf[j] = idx[i]
                j += 1
        for i in range(m):
            idx[start + i] = buf[i]
        feature[node] = f
        threshold[node] = t
        gain[node] = max(g, 0.0)
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is grown first
        st_node[sp] = n_nodes + 1
        st_start[sp] = start + nl
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = start
        st_end[sp] = start + nl
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_node[:n_nodes].copy(),
            gain[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _apply(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


class TreeStructure:
    """Flat node arrays of one fitted tree; node 0 is the root."""

    FIELDS = ("feature", "threshold", "left", "right", "value", "n_node", "gain")

    def __init__(self, feature, threshold, left, right, value, n_node, gain):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.n_node = n_node
        self.gain = gain

    @classmethod
    def grow(cls, X, y, sample_idx, max_features, max_depth, min_split, seed):
        md = -1 if max_depth is None else int(max_depth)
        parts = _grow(np.ascontiguousarray(X, dtype=np.float64), y.astype(np.int64),
                      np.ascontiguousarray(sample_idx, dtype=np.int64),
                      int(max_features), md, int(min_split), int(seed))
        return cls(*parts)

    @property
    def n_nodes(self):
        return self.feature.size

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def predict_value(self, X):
        return _apply(np.ascontiguousarray(X, dtype=np.float64), self.feature,
                      self.threshold, self.left, self.right, self.value)

    def importances(self, d):
        """Per-feature sum of ``(n_node / n_root) * gain``, normalised to 1
        (all zeros for a single-leaf tree)."""
        imp = np.zeros(d)
        internal = self.feature != LEAF
        np.add.at(imp, self.feature[internal],
                  self.n_node[internal] / self.n_node[0] * self.gain[internal])
        total = imp.sum()
        return imp / total if total > 0 else imp

    def arrays(self, prefix):
        return {f"{prefix}{name}": getattr(self, name) for name in self.FIELDS}

    @classmethod
    def from_arrays(cls, arrays, prefix):
        return cls(*(arrays[f"{prefix}{name}"] for name in cls.FIELDS))


class DecisionTree(Classifier):
    kind = "dt"

    def __init__(self, tree, n_features, params, seed):
        super().__init__(n_features, seed)
        self.tree = tree
        self.params = params

    @classmethod
    def fit(cls, X, y, params, seed=0):
        X, y = check_binary(X, y, "dt")
        tree = TreeStructure.grow(X, y, np.arange(len(y)), X.shape[1],
                                  params.max_depth, params.min_split, seed)
        return cls(tree, X.shape[1], params, seed)

    def _score(self, X):
        return self.tree.predict_value(X)

    def state(self):
        return self.tree.arrays("t0_")

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        return cls(TreeStructure.from_arrays(arrays, "t0_"), n_features, params, seed)


class RandomForest(Classifier):
    kind = "rf"

    def __init__(self, trees, n_features, params, seed):
        super().__init__(n_features, seed)
        self.trees = trees
        self.params = params

    @classmethod
    def fit(cls, X, y, params, seed=0, workers=1):
        """Each tree gets its own seed derived from ``seed``; bootstrap draws
        and per-node feature sampling use only that seed, so the result does
        not depend on ``workers``."""
        X, y = check_binary(X, y, "rf")
        X = np.ascontiguousarray(X, dtype=np.float64)
        n, d = X.shape
        mf = params.resolve_max_features(d)
        seeds = derive_seeds(seed, params.n_trees)

        def one(tree_seed):
            rng = np.random.default_rng(tree_seed)
            sample = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
            grow_seed = int(rng.integers(0, 2 ** 31 - 1))
            return TreeStructure.grow(X, y, sample, mf, params.max_depth, params.min_split, grow_seed)

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                trees = list(pool.map(one, seeds))
        else:
            trees = [one(s) for s in seeds]
        return cls(trees, d, params, seed)

    def _score(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict_value(X)
        return total / len(self.trees)

    def gini_importances(self):
        imp = np.zeros(self.n_features)
        for t in self.trees:
            imp += t.importances(self.n_features)
        return imp / len(self.trees)

    def state(self):
        out = {}
        for i, t in enumerate(self.trees):
            out.update(t.arrays(f"t{i}_"))
        return out

    @classmethod
    def from_state(cls, arrays, n_features, params, seed):
        n = len([k for k in arrays if k.endswith("_feature")])
        trees = [TreeStructure.from_arrays(arrays, f"t{i}_") for i in range(n)]
        return cls(trees, n_features, params, seed)
