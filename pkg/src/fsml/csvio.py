"""Delimited text formats for curves, labels, distances, embeddings and predictions.

Floats are written with 17 significant digits so every file round-trips
bitwise.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .fda import SampledCurve

FLOAT = "{:.17g}"


def _fmt(x):
    return FLOAT.format(float(x))


def _open_write(path):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def _rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ParameterError(f"{path}: missing column(s) {', '.join(missing)}; header is {header}")
        yield from enumerate(reader, start=2)


# ---------------------------------------------------------------------------
# curves and labels


def read_curves(path):
    """Long-format ``curve_id,t,value`` rows to :class:`SampledCurve` objects.

    Rows of one curve need not be contiguous. Curves come back in order of
    first appearance with their observations sorted by time.
    """
    times, values = defaultdict(list), defaultdict(list)
    for line, row in _rows(path, ("curve_id", "t", "value")):
        try:
            t, v = float(row["t"]), float(row["value"])
        except (TypeError, ValueError):
            raise ParameterError(f"{path}:{line}: t and value must be numeric") from None
        times[row["curve_id"]].append(t)
        values[row["curve_id"]].append(v)
    if not times:
        raise ParameterError(f"{path}: no curves found")
    curves = []
    for cid in times:
        t = np.asarray(times[cid])
        order = np.argsort(t, kind="stable")
        curves.append(SampledCurve(cid, t[order], np.asarray(values[cid])[order]))
    return curves


def write_curves(path, curves):
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(["curve_id", "t", "value"])
        for c in curves:
            for t, v in zip(c.times, c.values):
                out.writerow([c.id, _fmt(t), _fmt(v)])


def read_labels(path, ids=None):
    """Integer labels from ``curve_id,label``; aligned to ``ids`` when given."""
    table = {}
    for line, row in _rows(path, ("curve_id", "label")):
        try:
            table[row["curve_id"]] = int(row["label"])
        except (TypeError, ValueError):
            raise ParameterError(f"{path}:{line}: label must be an integer") from None
    if ids is None:
        return list(table), np.array(list(table.values()), dtype=int)
    missing = [i for i in ids if i not in table]
    if missing:
        raise ParameterError(f"{path}: no label for curve(s) {', '.join(missing[:5])}")
    return list(ids), np.array([table[i] for i in ids], dtype=int)


def write_labels(path, ids, labels):
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(["curve_id", "label"])
        for cid, y in zip(ids, labels):
            out.writerow([cid, int(y)])


def write_table(path, header, rows):
    """Plain CSV with floats at full precision."""
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


# ---------------------------------------------------------------------------
# geometry and embedding exports


def write_distance_matrix(path, ids, D):
    """n x n matrix with a header row of curve ids."""
    D = np.asarray(D, dtype=float)
    if D.shape != (len(ids), len(ids)):
        raise ParameterError("distance matrix shape does not match the id list")
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(list(ids))
        for row in D:
            out.writerow([_fmt(x) for x in row])


def read_distance_matrix(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        ids = next(reader)
        D = np.array([[float(x) for x in row] for row in reader])
    if D.shape != (len(ids), len(ids)):
        raise ParameterError(f"{path}: expected a {len(ids)} x {len(ids)} matrix, got {D.shape}")
    return ids, D


def write_coordinates(path, ids, coords, labels=None):
    """``curve_id,z1,...,zd`` with an optional trailing ``label`` column."""
    coords = np.atleast_2d(coords)
    header = ["curve_id"] + [f"z{k + 1}" for k in range(coords.shape[1])]
    if labels is not None:
        header.append("label")
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for a, cid in enumerate(ids):
            row = [cid] + [_fmt(z) for z in coords[a]]
            if labels is not None:
                row.append(int(labels[a]))
            out.writerow(row)


def embedding_report(embedding, xi=None):
    lines = []
    if xi is not None:
        lines.append(f"xi = {_fmt(xi)}")
    lines += [
        f"d = {embedding.d}",
        f"epsilon_mds = {_fmt(embedding.epsilon_mds)}",
        f"negative_eigenvalue_mass = {_fmt(embedding.negative_mass)}",
        "eigenvalues (descending):",
    ]
    lines += [_fmt(v) for v in embedding.eigenvalues]
    return "\n".join(lines) + "\n"


def write_embedding(path, ids, embedding, labels, xi=None):
    """Embedding CSV plus a ``<stem>.report.txt`` sidecar with the spectrum."""
    write_coordinates(path, ids, embedding.coords, labels)
    side = Path(path).with_suffix(".report.txt")
    side.write_text(embedding_report(embedding, xi))
    return side


def write_dim_diagnostics(path, ids, estimate):
    """Per-point TWO-NN ratios, whether each was kept, and the estimate."""
    rows = [(cid, float(r), int(k)) for cid, r, k in zip(ids, estimate.ratios, estimate.kept)]
    with _open_write(path) as fh:
        fh.write(f"# dimension={estimate.dimension} raw={_fmt(estimate.raw)}\n")
        out = csv.writer(fh)
        out.writerow(["curve_id", "mu", "kept"])
        for cid, r, k in rows:
            out.writerow([cid, _fmt(r), k])


# ---------------------------------------------------------------------------
# predictions and cross-validation


def write_predictions(path, ids, predicted, scores=None, classes=None):
    """``curve_id,predicted_label`` plus ``score_<class>`` columns when scores are given."""
    header = ["curve_id", "predicted_label"]
    if scores is not None:
        scores = np.atleast_2d(scores)
        if classes is None or scores.shape[1] != len(classes):
            # binary SVM keeps one decision value, for the larger class
            classes = list(classes)[-scores.shape[1]:] if classes is not None else range(scores.shape[1])
        header += [f"score_{c}" for c in classes]
    with _open_write(path) as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for a, cid in enumerate(ids):
            row = [cid, int(predicted[a])]
            if scores is not None:
                row += [_fmt(s) for s in scores[a]]
            out.writerow(row)


def write_cv(path, cv, head=None):
    write_table(path, ["xi", "fold", "misclassifications", "h_inner"], cv.rows(head))
