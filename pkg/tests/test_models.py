import numpy as np
import pytest

from thermopore.models import (KINDS, FAMILIES, Hyperparams, TrainingError, derive_seeds,
                               gini_importances, load_model, predict, save_model, score, train)
from thermopore.models.boosting import AdaBoost
from thermopore.models.linear import LogisticRegression, logloss_grad
from thermopore.models.mlp import init_params, loss_and_grad
from thermopore.models.params import AdaBoostParams, ForestParams, LogRegParams, TreeParams
from thermopore.models.tree import DecisionTree, RandomForest

FAST = Hyperparams().with_overrides("rf", n_trees=8).with_overrides("mlp", epochs=10, hidden=(8,)) \
    .with_overrides("adaboost", n_rounds=10).with_overrides("lr", max_iter=200)


def _data(rng, n=200, d=4):
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=n) > 0.3).astype(int)
    return X, y


def gini(y):
    if len(y) == 0:
        return 0.0
    p = np.mean(y)
    return 2 * p * (1 - p)


def brute_best_split(X, y):
    """Every feature, every midpoint: maximum weighted Gini decrease."""
    n = len(y)
    best = (-1.0, None, None)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            t = (a + b) / 2
            L = y[X[:, f] <= t]
            R = y[X[:, f] > t]
            gain = gini(y) - len(L) / n * gini(L) - len(R) / n * gini(R)
            if gain > best[0] + 1e-12:
                best = (gain, f, t)
    return best


@pytest.mark.parametrize("seed", range(4))
def test_stump_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(40, 3)).astype(float)
    y = rng.integers(0, 2, size=40)
    gain, f, t = brute_best_split(X, y)
    tree = DecisionTree.fit(X, y, TreeParams(max_depth=1), seed=0).tree
    root_gain = tree.gain[0]
    assert root_gain == pytest.approx(gain, abs=1e-12)
    # the chosen split attains the optimum even when features tie
    fc, tc = tree.feature[0], tree.threshold[0]
    L, R = y[X[:, fc] <= tc], y[X[:, fc] > tc]
    assert gini(y) - len(L) / 40 * gini(L) - len(R) / 40 * gini(R) == pytest.approx(gain, abs=1e-12)


def test_stump_threshold():
    X = np.array([[0.0], [1.0]])
    tree = DecisionTree.fit(X, np.array([0, 1]), TreeParams(), seed=0)
    assert tree.tree.threshold[0] == 0.5
    assert predict(tree, X).tolist() == [0, 1]


def test_tree_memorises_consistent_data(rng):
    X, y = _data(rng, 300)
    y = rng.integers(0, 2, size=300)  # random labels, distinct rows
    dt = train("dt", Hyperparams(), X, y)
    assert np.array_equal(predict(dt, X), y)


def test_tree_zero_gain_split_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    y = np.array([0, 1, 1, 0])
    dt = DecisionTree.fit(X, y, TreeParams(), 0)
    assert np.array_equal(dt.predict(X), y)


def test_tree_respects_depth(rng):
    X, y = _data(rng)
    dt = DecisionTree.fit(X, y, TreeParams(max_depth=3), 0)
    assert dt.tree.depth <= 3


def test_forest_of_one_equals_tree(rng):
    X, y = _data(rng)
    rf = RandomForest.fit(X, y, ForestParams(n_trees=1, max_features="all", bootstrap=False), seed=3)
    dt = DecisionTree.fit(X, y, TreeParams(), seed=0)
    Xt = rng.normal(size=(100, 4))
    assert np.array_equal(rf.score(Xt), dt.score(Xt))


def test_forest_workers_identical(rng):
    X, y = _data(rng)
    a = RandomForest.fit(X, y, ForestParams(n_trees=6), seed=1, workers=1)
    b = RandomForest.fit(X, y, ForestParams(n_trees=6), seed=1, workers=3)
    assert np.array_equal(a.score(X), b.score(X))
    assert np.array_equal(a.gini_importances(), b.gini_importances())


def test_importance_one_hot():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 5))
    y = (X[:, 2] > 0).astype(int)
    rf = RandomForest.fit(X, y, ForestParams(n_trees=10, max_features="all"), seed=0)
    imp = gini_importances(rf)
    assert imp.sum() == pytest.approx(1.0)
    assert imp[2] == pytest.approx(1.0)


def test_importance_sums_to_one(rng):
    X, y = _data(rng)
    imp = gini_importances(train("rf", FAST, X, y, seed=2))
    assert imp.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(imp >= 0)
    with pytest.raises(ValueError):
        gini_importances(train("dt", FAST, X, y))


def test_importance_tree_oracle(rng):
    """Recompute one tree's importances by walking its nodes."""
    X, y = _data(rng, 150)
    t = DecisionTree.fit(X, y, TreeParams(max_depth=4), 0).tree
    imp = np.zeros(4)
    for node in range(t.n_nodes):
        if t.feature[node] >= 0:
            imp[t.feature[node]] += t.n_node[node] / t.n_node[0] * t.gain[node]
    assert np.allclose(t.importances(4), imp / imp.sum())


def brute_knn_score(Xtr, ytr, Xq, k):
    out = []
    for q in Xq:
        d = sorted((float(np.sum((q - r) ** 2)), j) for j, r in enumerate(Xtr))
        out.append(np.mean([ytr[j] for _, j in d[:k]]))
    return np.array(out)


def test_knn_examples():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    y = np.array([1, 1, 0, 0])
    m = train("knn", Hyperparams().with_overrides("knn", k=3), X, y)
    assert score(m, np.array([[1.0]]))[0] == pytest.approx(2 / 3)


def test_knn_matches_brute_with_ties(rng):
    X = rng.integers(0, 3, size=(80, 2)).astype(float)
    y = rng.integers(0, 2, size=80)
    Xq = rng.integers(0, 3, size=(30, 2)).astype(float)
    m = train("knn", Hyperparams().with_overrides("knn", k=5), X, y)
    assert np.allclose(score(m, Xq), brute_knn_score(X, y, Xq, 5))


def test_logreg_balanced_intercept():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(2000, 3))
    y = np.r_[np.zeros(1000, int), np.ones(1000, int)]
    m = LogisticRegression.fit(X, y, LogRegParams())
    assert abs(m.b) < 0.1


def test_logreg_gradient_finite_difference(rng):
    X, y = _data(rng, 50, 3)
    w, b = rng.normal(size=3), 0.2
    _, gw, gb = logloss_grad(w, b, X, y, 1e-3)
    eps = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = eps
        num = (logloss_grad(w + e, b, X, y, 1e-3)[0] - logloss_grad(w - e, b, X, y, 1e-3)[0]) / (2 * eps)
        assert gw[j] == pytest.approx(num, rel=1e-5, abs=1e-8)
    num = (logloss_grad(w, b + eps, X, y, 1e-3)[0] - logloss_grad(w, b - eps, X, y, 1e-3)[0]) / (2 * eps)
    assert gb == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_mlp_gradient_finite_difference(rng):
    X = rng.normal(size=(20, 3))
    y = rng.integers(0, 2, size=20).astype(float)
    params = init_params([3, 5, 4, 1], rng)
    _, grads = loss_and_grad(params, X, y)
    eps = 1e-6
    for p, g in zip(params, grads):
        for idx in list(np.ndindex(p.shape))[:6]:
            old = p[idx]
            p[idx] = old + eps
            lp = loss_and_grad(params, X, y)[0]
            p[idx] = old - eps
            lm = loss_and_grad(params, X, y)[0]
            p[idx] = old
            assert g[idx] == pytest.approx((lp - lm) / (2 * eps), rel=1e-4, abs=1e-7)


def test_adaboost_separable():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = AdaBoost.fit(X, y, AdaBoostParams(n_rounds=5))
    assert m.thresholds[0] == 1.5
    assert np.array_equal(m.predict(X), y)
    s = m.score(X)
    assert np.all(s[2:] > 0.5) and np.all(s[:2] < 0.5)


@pytest.mark.parametrize("kind", KINDS)
def test_contract(kind, rng, tmp_path):
    X, y = _data(rng)
    m = train(kind, FAST, X, y, seed=5)
    s = score(m, X)
    assert s.shape == (200,) and np.all((s >= 0) & (s <= 1))
    assert np.array_equal(predict(m, X, 0.5), (s >= 0.5).astype(int))
    # deterministic
    assert np.array_equal(score(train(kind, FAST, X, y, seed=5), X), s)
    # save/load round trip
    save_model(m, tmp_path / "m.npz")
    m2 = load_model(tmp_path / "m.npz")
    assert type(m2) is FAMILIES[kind][0]
    assert np.array_equal(score(m2, X), s)
    with pytest.raises(ValueError):
        score(m, X[:, :3])


@pytest.mark.parametrize("kind", ["dt", "rf", "lr", "adaboost", "mlp"])
def test_single_class_rejected(kind, rng):
    with pytest.raises(TrainingError):
        train(kind, FAST, rng.normal(size=(10, 2)), np.zeros(10, int))


def test_unknown_kind(rng):
    with pytest.raises(ValueError):
        train("svm", FAST, rng.normal(size=(4, 2)), np.array([0, 1, 0, 1]))


def test_derive_seeds():
    a = derive_seeds(0, 5)
    assert a == derive_seeds(0, 5)
    assert len(set(a)) == 5
    assert derive_seeds(0, 5, 1) != a
    assert all(0 <= s < 2 ** 63 for s in a)
