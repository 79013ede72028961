import numpy as np
import pytest

from thermopore.resample import (DANGER, NOISE, SAFE, SmoteConfig, borderline_smote,
                                 classify_minority, nearest_neighbors, tag_from_count)


def brute_knn(queries, ref, k, skip):
    out = []
    for i, q in enumerate(queries):
        d = [(float(np.sum((q - r) ** 2)), j) for j, r in enumerate(ref) if skip is None or j != skip[i]]
        out.append([j for _, j in sorted(d)[:k]])
    return np.array(out)


def test_tag_rules():
    assert tag_from_count(10, 10) == NOISE
    assert tag_from_count(5, 10) == DANGER
    assert tag_from_count(9, 10) == DANGER
    assert tag_from_count(4, 10) == SAFE
    assert tag_from_count(0, 10) == SAFE


def test_nearest_neighbors_matches_brute(rng):
    ref = rng.integers(0, 4, size=(60, 3)).astype(float)  # many ties
    q = ref[:20]
    nn = nearest_neighbors(q, ref, 6, self_index=np.arange(20), chunk=7)
    assert np.array_equal(nn, brute_knn(q, ref, 6, np.arange(20)))


def _blobs(rng, n0=300, n1=40):
    X = np.vstack([rng.normal(0, 1, (n0, 3)), rng.normal(1.2, 1, (n1, 3))])
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    return X, y


def test_classify_matches_brute(rng):
    X, y = _blobs(rng)
    rows, tags = classify_minority(X, y, 10)
    for r, t in zip(rows, tags):
        nn = brute_knn(X[[r]], X, 10, [r])[0]
        assert t == tag_from_count(int(np.sum(y[nn] == 0)), 10)


def test_balance_and_originals_preserved(rng):
    X, y = _blobs(rng)
    Xo, yo = borderline_smote(X, y, SmoteConfig(seed=1))
    assert np.sum(yo == 0) == np.sum(yo == 1) == 300
    assert np.array_equal(Xo[:len(X)], X)
    assert np.array_equal(yo[:len(y)], y)
    assert np.all(yo[len(y):] == 1)


def test_log_replay_and_convexity(rng):
    X, y = _blobs(rng)
    Xo, _, lg = borderline_smote(X, y, SmoteConfig(seed=4), return_log=True)
    synth = Xo[len(X):]
    replay = X[lg.p] + lg.r[:, None] * (X[lg.q] - X[lg.p])
    assert np.max(np.abs(replay - synth)) < 1e-9
    assert np.all((lg.r > 0) & (lg.r < 1))
    assert np.all(y[lg.p] == 1) and np.all(y[lg.q] == 1)
    # each synthetic row lies on the segment between its two parents
    lo = np.minimum(X[lg.p], X[lg.q]) - 1e-12
    hi = np.maximum(X[lg.p], X[lg.q]) + 1e-12
    assert np.all((synth >= lo) & (synth <= hi))


def test_seeds_are_danger_rows(rng):
    X, y = _blobs(rng)
    rows, tags = classify_minority(X, y, 10)
    danger = set(rows[np.array(tags) == DANGER].tolist())
    noise = set(rows[np.array(tags) == NOISE].tolist())
    assert danger
    _, _, lg = borderline_smote(X, y, SmoteConfig(seed=0), return_log=True)
    assert set(lg.p.tolist()) <= danger
    assert not set(lg.p.tolist()) & noise
    # round robin: every danger seed is used
    assert set(lg.p.tolist()) == danger


def test_partners_are_seed_knn(rng):
    X, y = _blobs(rng)
    _, _, lg = borderline_smote(X, y, SmoteConfig(seed=2, k_syn=5), return_log=True)
    rows = np.flatnonzero(y == 1)
    for p, q in zip(lg.p[:30], lg.q[:30]):
        pos = int(np.searchsorted(rows, p))
        nn = rows[brute_knn(X[[p]], X[rows], 5, [pos])[0]]
        assert q in nn


def test_determinism(rng):
    X, y = _blobs(rng)
    a = borderline_smote(X, y, SmoteConfig(seed=9))
    b = borderline_smote(X, y, SmoteConfig(seed=9))
    c = borderline_smote(X, y, SmoteConfig(seed=10))
    assert np.array_equal(a[0], b[0])
    assert not np.array_equal(a[0], c[0])


def test_fallback_without_danger():
    # well separated clusters: every minority point is safe
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.1, (50, 2)), rng.normal(10, 0.1, (12, 2))])
    y = np.r_[np.zeros(50, int), np.ones(12, int)]
    Xo, yo = borderline_smote(X, y, SmoteConfig(seed=0))
    assert np.sum(yo == 1) == 50
    assert np.all(Xo[len(X):, 0] > 9)


def test_balanced_input_unchanged(rng):
    X = rng.random((10, 2))
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    Xo, yo = borderline_smote(X, y)
    assert np.array_equal(Xo, X) and np.array_equal(yo, y)


def test_single_class_rejected(rng):
    with pytest.raises(ValueError):
        borderline_smote(rng.random((5, 2)), np.zeros(5, int))


def test_log_csv(tmp_path, rng):
    X, y = _blobs(rng, 50, 10)
    _, _, lg = borderline_smote(X, y, SmoteConfig(seed=0), return_log=True)
    lg.to_csv(tmp_path / "log.csv")
    data = np.loadtxt(tmp_path / "log.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 2], lg.r)
