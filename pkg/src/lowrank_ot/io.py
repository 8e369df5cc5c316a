"""CSV / JSON input and output for measures and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .measures import DiscreteMeasure, new_discrete_measure

FLOAT_FMT = "%.17g"


def read_points_csv(path):
    """One point per row, d columns, no header."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}: ragged row {i} "
                                 f"({len(row)} fields, expected {width})")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"{path}: row {i}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def read_weights_csv(path):
    w = read_points_csv(path)
    if w.shape[1] != 1:
        raise ParseError(f"{path}: weights must be a single column")
    return w.ravel()


def read_measure(path) -> DiscreteMeasure:
    """A measure given as a points CSV or a JSON manifest
    {"points": "path.csv", "weights": "path.csv" | null}."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        try:
            manifest = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        base = p.parent
        points = None
        weights = None
        if manifest.get("points"):
            points = read_points_csv(base / manifest["points"])
        if manifest.get("weights"):
            weights = read_weights_csv(base / manifest["weights"])
        if points is None and weights is None:
            raise ParseError(f"{path}: manifest needs points and/or weights")
        return new_discrete_measure(points=points, weights=weights)
    return new_discrete_measure(points=read_points_csv(p))


def write_points_csv(path, points):
    points = np.atleast_2d(np.asarray(points))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in points:
            w.writerow([FLOAT_FMT % v for v in row])


def write_report(report: dict, path):
    """Stable-key-ordered JSON report."""
    Path(path).write_text(report_json(report))


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2,
                      default=_jsonify) + "\n"


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")
