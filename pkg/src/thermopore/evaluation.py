"""Imbalance-aware evaluation: confusion matrices, ROC/PR curves, scalar
metrics, the experiment table and the Gini importance study."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import features as feat
from .models import Hyperparams, derive_seeds, gini_importances, train
from .resample import SmoteConfig, borderline_smote

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool = False


def confusion(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    t = y_true == 1
    p = y_pred == 1
    return ConfusionMatrix(tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
                           fn=int(np.sum(t & ~p)), tn=int(np.sum(~t & ~p)))


def classification_metrics(cm):
    """Precision, recall, F1 and accuracy; zero denominators give 0 and
    set ``degenerate``."""
    if isinstance(cm, ConfusionMatrix):
        tp, fp, fn, tn = cm.tp, cm.fp, cm.fn, cm.tn
    else:
        tp, fp, fn, tn = cm
    total = tp + fp + fn + tn
    if total <= 0:
        raise ValueError("empty confusion matrix")
    degenerate = False
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    f1 = f1_from(precision, recall)
    if precision + recall == 0:
        degenerate = True
    return Metrics(precision, recall, f1, (tp + tn) / total, degenerate)


def f1_from(precision, recall):
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def _sweep(y_true, scores):
    """Cumulative (tp, fp) after admitting each distinct score, descending."""
    y_true = np.asarray(y_true).astype(bool)
    scores = np.asarray(scores, dtype=float)
    if y_true.shape != scores.shape:
        raise ValueError("labels and scores differ in length")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = y_true[order]
    tps = np.cumsum(t)
    fps = np.cumsum(~t)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    return tps[last], fps[last], s[last]


def roc_auc(y_true, scores):
    """ROC vertices ``(fpr, tpr)`` from (0, 0) through each distinct score
    threshold, and the trapezoidal area under them."""
    y = np.asarray(y_true)
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both classes in y_true")
    tps, fps, _ = _sweep(y, scores)
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return list(zip(fpr.tolist(), tpr.tolist())), auc


def pr_curve(y_true, scores):
    """``(recall, precision)`` vertex per distinct threshold, sweeping from
    the highest score down; the last vertex has recall 1."""
    y = np.asarray(y_true)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise ValueError("precision-recall curve needs at least one positive")
    tps, fps, _ = _sweep(y, scores)
    recall = tps / n_pos
    precision = tps / (tps + fps)
    return list(zip(recall.tolist(), precision.tolist()))


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    auc: float
    precision: float
    recall: float
    f1: float
    accuracy: float
    roc_points: list
    pr_points: list
    predicted_positive_count: int
    ground_truth_positive_count: int
    degenerate: bool = False

    def to_json(self):
        return {
            "auc": self.auc, "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "accuracy": self.accuracy,
            "tp": self.confusion.tp, "fp": self.confusion.fp,
            "fn": self.confusion.fn, "tn": self.confusion.tn,
            "predicted_positive_count": self.predicted_positive_count,
            "ground_truth_positive_count": self.ground_truth_positive_count,
            "fp_minus_fn": self.confusion.fp - self.confusion.fn,
            "degenerate": self.degenerate,
            "roc_points": [list(p) for p in self.roc_points],
            "pr_points": [list(p) for p in self.pr_points],
        }


def evaluate(y_true, scores, threshold=0.5):
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=float)
    y_pred = (scores >= threshold).astype(np.int8)
    cm = confusion(y_true, y_pred)
    m = classification_metrics(cm)
    roc, auc = roc_auc(y_true, scores)
    return EvalReport(cm, auc, m.precision, m.recall, m.f1, m.accuracy, roc,
                      pr_curve(y_true, scores), cm.tp + cm.fp, cm.tp + cm.fn, m.degenerate)


# ---------------------------------------------------------------------------
# pipeline helpers


@dataclass
class PreparedSplit:
    """Scaled, oversampled training rows and untouched test rows."""

    train_rows: np.ndarray
    test_rows: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    scale: feat.ScaleParams
    n_synthetic: int


def prepare_split(fm, y, test_fraction, seed, smote=SmoteConfig(), scale_fit="train"):
    """Split, fit min-max scaling, then Borderline-SMOTE the training rows
    only. Test rows keep their original class balance."""
    split_seed, smote_seed = derive_seeds(seed, 2)
    train_rows, test_rows = feat.split(fm.n_rows, feat.SplitSpec(test_fraction, split_seed))
    if scale_fit == "train":
        scale = feat.fit_minmax(fm.X[train_rows])
    elif scale_fit == "all":
        scale = feat.fit_minmax(fm.X)
    else:
        raise ValueError(f"scale_fit must be 'train' or 'all', got {scale_fit!r}")
    Xtr = feat.apply_minmax(fm.X[train_rows], scale)
    Xte = feat.apply_minmax(fm.X[test_rows], scale)
    ytr = np.asarray(y)[train_rows]
    cfg = SmoteConfig(smote.m, smote.k_syn, smote_seed, smote.variant)
    Xb, yb = borderline_smote(Xtr, ytr, cfg)
    return PreparedSplit(train_rows, test_rows, Xb, yb, Xte, np.asarray(y)[test_rows],
                         scale, len(yb) - len(ytr))


@dataclass
class Cell:
    kernel: int
    holdout: float
    model: str
    report: EvalReport
    test_coords: np.ndarray
    y_test: np.ndarray
    y_pred: np.ndarray

    @property
    def name(self):
        return f"{self.model}_K{self.kernel}_h{round(self.holdout * 100):02d}"


def cell_seed(seed, kernel, holdout):
    return derive_seeds(seed, 1, kernel, round(holdout * 10000))[0]


def experiment_table(thermal, labels, kernels, holdouts, model_kinds, seed=0,
                     hp=Hyperparams(), smote=SmoteConfig(), scale_fit="train", workers=1,
                     progress=None):
    """Run every kernel x hold-out x model cell.

    All models of one (kernel, hold-out) pair share the split, scaling and
    oversampled training set; evaluation is on the original test rows.
    """
    if not model_kinds:
        raise ValueError("no models requested")
    cells = []
    for k in kernels:
        fm, y = feat.extract_kernel(thermal, labels, k)
        for h in holdouts:
            s = cell_seed(seed, k, h)
            prep = prepare_split(fm, y, h, s, smote, scale_fit)
            for kind in model_kinds:
                model_seed = derive_seeds(s, 1, hash_kind(kind))[0]
                model = train(kind, hp, prep.X_train, prep.y_train, model_seed, workers)
                scores = model.score(prep.X_test)
                report = evaluate(prep.y_test, scores, hp.threshold)
                cells.append(Cell(k, h, kind, report, fm.row_coords[prep.test_rows],
                                  prep.y_test, (scores >= hp.threshold).astype(np.int8)))
                if progress:
                    progress(cells[-1])
    return cells


def hash_kind(kind):
    # stable across processes, unlike hash()
    return sum((i + 1) * ord(c) for i, c in enumerate(kind))


# ---------------------------------------------------------------------------
# importance study


@dataclass
class ImportanceReport:
    kernel: int
    mean_score: np.ndarray
    per_kind: dict
    per_layer: dict
    n_splits: int
    train_fraction: float
    seed: int
    warnings: list = field(default_factory=list)

    def to_json(self):
        return {"kernel": self.kernel, "mean_score": self.mean_score.tolist(),
                "per_kind": self.per_kind, "per_layer": self.per_layer,
                "n_splits": self.n_splits, "train_fraction": self.train_fraction,
                "seed": self.seed, "warnings": list(self.warnings)}


def aggregate_importance(mean_score, k):
    """Per-kind (``tau_mean``, ``tmax_mean``) and per-layer means of an
    importance vector laid out as kernel-k features."""
    kinds = {"tau": [], "tmax": []}
    layers = {}
    for i, v in enumerate(mean_score):
        kind, (_, _, dz) = feat.feature_index_meta(i, k)
        kinds[kind].append(v)
        layers.setdefault(dz, []).append(v)
    per_kind = {"tau_mean": float(np.mean(kinds["tau"])),
                "tmax_mean": float(np.mean(kinds["tmax"]))}
    per_layer = {feat.layer_tag(dz): float(np.mean(layers[dz])) for dz in sorted(layers)}
    return per_kind, per_layer


class StudyError(RuntimeError):
    pass


def importance_study(thermal, labels, k, n_splits=100, train_fraction=0.7, forest_hp=None,
                     seed=0, smote=SmoteConfig(), scale_fit="train", workers=1):
    """Mean random-forest Gini importance over repeated random splits."""
    hp = Hyperparams() if forest_hp is None else Hyperparams(rf=forest_hp)
    fm, y = feat.extract_kernel(thermal, labels, k)
    seeds = derive_seeds(seed, n_splits)
    total = np.zeros(fm.n_cols)
    for i, s in enumerate(seeds):
        try:
            prep = prepare_split(fm, y, 1.0 - train_fraction, s, smote, scale_fit)
            forest = train("rf", hp, prep.X_train, prep.y_train, derive_seeds(s, 1, 7)[0], workers)
        except Exception as exc:
            raise StudyError(f"importance study failed at split {i}: {exc}") from exc
        total += gini_importances(forest)
    mean = total / n_splits
    per_kind, per_layer = aggregate_importance(mean, k)
    warnings = []
    if n_splits < 10:
        warnings.append(f"low replication: only {n_splits} split(s)")
        log.warning(warnings[-1])
    return ImportanceReport(k, mean, per_kind, per_layer, n_splits, train_fraction, seed, warnings)


def report_dict(obj):
    return obj.to_json() if hasattr(obj, "to_json") else asdict(obj)
