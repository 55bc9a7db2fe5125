"""Report artifacts derived from sweep records: heatmaps and score-vs-accuracy fits."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..statfit import linear_fit, pearson_r, weighted_tau
from .records import to_transfer_records


def _labels(windows):
    return [w if isinstance(w, str) else w.label for w in windows]


def emit_heatmap(records, method, windows, path):
    """Accuracy matrix (rows: sources, cols: targets) written as CSV.

    The diagonal comes from SELF reference rows; off-diagonal cells from the
    given transfer method. Cells without an ok record stay empty in the CSV
    and NaN in the returned matrix. Returns (matrix, labels).
    """
    labels = _labels(windows)
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    matrix = np.full((n, n), np.nan)
    for row in records:
        if row["status"] != "ok" or row["source"] not in index or row["target"] not in index:
            continue
        want = "SELF" if row["source"] == row["target"] else method
        if row["method"] != want:
            continue
        matrix[index[row["source"]], index[row["target"]]] = row["accuracy"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source/target"] + labels)
        for i, lab in enumerate(labels):
            cells = ["" if np.isnan(v) else str(float(v)) for v in matrix[i]]
            writer.writerow([lab] + cells)
    return matrix, labels


def emit_scatter_fit(records, metric, method, out_prefix):
    """Score-vs-accuracy points plus a linear fit summary.

    Writes {prefix}_points.csv and {prefix}_fit.json from off-diagonal ok rows
    of the given method. Raises if fewer than 3 points or the scores are
    degenerate.
    """
    metric = metric.upper()
    rows = [
        r
        for r in to_transfer_records(records)
        if r.method == method and r.source != r.target
    ]
    if len(rows) < 3:
        raise ValueError(f"need at least 3 {method} records, got {len(rows)}")
    scores = np.array([r.score(metric) for r in rows], dtype=np.float64)
    accs = np.array([r.accuracy for r in rows], dtype=np.float64)
    beta0, beta1 = linear_fit(scores, accs)
    summary = {
        "metric": metric,
        "method": method,
        "n": len(rows),
        "beta0": beta0,
        "beta1": beta1,
        "pearson_r": pearson_r(scores, accs),
        "weighted_tau": weighted_tau(scores, accs),
    }
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}_points.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "score", "accuracy"])
        for r, s in zip(rows, scores):
            writer.writerow([r.source, r.target, str(float(s)), str(float(r.accuracy))])
    with open(f"{prefix}_fit.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return summary
