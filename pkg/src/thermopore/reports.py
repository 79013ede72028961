"""Report bundle writers (CSV and JSON). Every file is written to a
temporary sibling and renamed into place."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .evaluation import f1_from
from .features import feature_index_meta, layer_tag
from .models import DISPLAY_NAMES

TABLE1_HEADER = "holdout,kernel,model,ground_truth_positive,predicted_positive,auc"
TABLE2_HEADER = "holdout,kernel,model,precision,recall,f1,accuracy"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv(header, rows):
    return header + "\n" + "".join(",".join(str(v) for v in row) + "\n" for row in rows)


def _num(v):
    return repr(float(v))


def _sort_key(cell, order):
    return (cell.holdout, order.get(cell.model, 99), cell.kernel)


def table1(cells):
    """Long-format detection-count table: one row per hold-out x kernel x model with the
    ground-truth and predicted defective counts and the ROC-AUC."""
    order = {k: i for i, k in enumerate(DISPLAY_NAMES)}
    rows = []
    for c in sorted(cells, key=lambda c: _sort_key(c, order)):
        r = c.report
        rows.append((_num(c.holdout), f"K{c.kernel}", DISPLAY_NAMES[c.model],
                     r.ground_truth_positive_count, r.predicted_positive_count, _num(r.auc)))
    return _csv(TABLE1_HEADER, rows)


def table2(cells):
    order = {k: i for i, k in enumerate(DISPLAY_NAMES)}
    rows = []
    for c in sorted(cells, key=lambda c: _sort_key(c, order)):
        r = c.report
        rows.append((_num(c.holdout), f"K{c.kernel}", DISPLAY_NAMES[c.model], _num(r.precision),
                     _num(r.recall), _num(f1_from(r.precision, r.recall)), _num(r.accuracy)))
    return _csv(TABLE2_HEADER, rows)


def curve_csv(points, xname, yname):
    return _csv(f"{xname},{yname}", [(_num(a), _num(b)) for a, b in points])


def prediction_map(cell):
    """Test voxels only, ordered by layer then y then x."""
    c = cell.test_coords
    order = np.lexsort((c[:, 0], c[:, 1], c[:, 2]))
    rows = [(*c[i].tolist(), int(cell.y_test[i]), int(cell.y_pred[i])) for i in order]
    return _csv("x,y,z,truth,prediction", rows)


def write_run_bundle(out, cells, config_text):
    out = Path(out)
    write_atomic(out / "config.ini", config_text)
    write_atomic(out / "table1.csv", table1(cells))
    write_atomic(out / "table2.csv", table2(cells))
    for c in cells:
        write_json(out / "cells" / f"{c.name}.json",
                   {"model": c.model, "kernel": c.kernel, "holdout": c.holdout, **c.report.to_json()})
        write_atomic(out / "curves" / f"{c.name}_roc.csv", curve_csv(c.report.roc_points, "fpr", "tpr"))
        write_atomic(out / "curves" / f"{c.name}_pr.csv", curve_csv(c.report.pr_points, "recall", "precision"))
        write_atomic(out / "maps" / f"{c.name}.csv", prediction_map(c))


def importance_scores_csv(report):
    rows = []
    for i, v in enumerate(report.mean_score):
        kind, (dx, dy, dz) = feature_index_meta(i, report.kernel)
        rows.append((i, kind, dx, dy, dz, layer_tag(dz), _num(v)))
    return _csv("index,kind,dx,dy,dz,layer,mean_score", rows)


def importance_layers_csv(report):
    rows = [(tag, _num(v)) for tag, v in report.per_layer.items()]
    rows += [(name, _num(v)) for name, v in report.per_kind.items()]
    return _csv("group,mean_score", rows)


def write_importance_bundle(out, report, config_text):
    out = Path(out)
    write_atomic(out / "config.ini", config_text)
    write_json(out / "importance.json", report.to_json())
    write_atomic(out / "importance_scores.csv", importance_scores_csv(report))
    write_atomic(out / "importance_layers.csv", importance_layers_csv(report))
