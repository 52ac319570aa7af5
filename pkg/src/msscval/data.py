"""CSV ingestion and synthetic Gaussian-mixture instances."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import Dataset


class DataError(ValueError):
    """Malformed input file. ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, path=None, row=None, column=None):
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.path, self.row, self.column = path, row, column


def _rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            yield lineno, row


def ingest_csv(path, has_header: bool = False) -> Dataset:
    """One point per row, comma-separated reals."""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path)
    points, width = [], None
    rows = _rows(path)
    if has_header:
        next(rows, None)
    for lineno, row in rows:
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"expected {width} fields, found {len(row)}", path, lineno)
        values = []
        for col, field in enumerate(row, start=1):
            try:
                v = float(field.strip())
            except ValueError:
                raise DataError(f"cannot parse {field!r} as a number", path, lineno, col) from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {field.strip()!r}", path, lineno, col)
            values.append(v)
        points.append(values)
    if not points:
        raise DataError("no data rows", path)
    return Dataset(np.array(points))


def read_labels(path, has_header: bool = False) -> np.ndarray:
    """One 0-based integer cluster index per row."""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path)
    rows = _rows(path)
    if has_header:
        next(rows, None)
    labels = []
    for lineno, row in rows:
        if len(row) != 1:
            raise DataError(f"expected a single label, found {len(row)} fields", path, lineno)
        try:
            labels.append(int(row[0].strip()))
        except ValueError:
            raise DataError(f"cannot parse {row[0]!r} as an integer label", path, lineno, 1) from None
    return np.array(labels, dtype=np.int64)


def write_points(path, points) -> None:
    np.savetxt(path, np.asarray(points), delimiter=",", fmt="%.17g")


def write_labels(path, labels) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def generate_synthetic(n: int, k: int, sigma: float, rng: np.random.Generator,
                       d: int = 2, low: float = -1.0, high: float = 10.0):
    """Equal-weight mixture of k spherical Gaussians with standard deviation sigma.

    Centres are uniform in [low, high]^d. Component sizes differ by at most one.
    Returns ``(dataset, labels)``; the labels are the generating components.
    """
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    centers = rng.uniform(low, high, size=(k, d))
    labels = rng.permutation(np.arange(n) % k)
    points = centers[labels] + sigma * rng.standard_normal((n, d))
    return Dataset(points), labels


def make_replicas(base_points, base_labels, copies: int):
    """Stack ``copies`` identical copies of a labelled point pattern.

    Copy c occupies rows ``c * len(base) ... (c + 1) * len(base) - 1``.
    """
    base = np.asarray(base_points, dtype=np.float64)
    labels = np.asarray(base_labels, dtype=np.int64)
    return Dataset(np.tile(base, (copies, 1))), np.tile(labels, copies)
