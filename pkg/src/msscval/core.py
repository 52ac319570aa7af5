"""Datasets, clusterings and the sum-of-squares identities everything else leans on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ClusteringError(ValueError):
    """Raised when an assignment does not describe a valid clustering."""


class EmptyClusterError(ClusteringError):
    pass


class DimensionMismatchError(ClusteringError):
    pass


def as_points(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return pts


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable N x D point matrix. Point identity is the row index."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"expected a non-empty N x D matrix, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            row, col = np.argwhere(~np.isfinite(pts))[0]
            raise ValueError(f"non-finite coordinate at row {row}, column {col}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.points[np.asarray(idx)])

    def __len__(self):
        return self.n


def check_assignment(assignment, n: int, k: int, allow_empty: bool = False) -> np.ndarray:
    labels = np.asarray(assignment)
    if labels.ndim != 1 or labels.shape[0] != n:
        raise DimensionMismatchError(
            f"assignment has shape {labels.shape}, expected ({n},)"
        )
    if n and not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise ClusteringError("cluster indices must be integers")
    labels = labels.astype(np.int64)
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise ClusteringError(f"cluster indices must lie in [0, {k})")
    if not allow_empty:
        counts = np.bincount(labels, minlength=k)
        if (counts == 0).any():
            missing = np.flatnonzero(counts == 0).tolist()
            raise EmptyClusterError(f"clusters {missing} have no points")
    return labels


def cluster_means(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-cluster means; rows of empty clusters are NaN."""
    means = np.full((k, points.shape[1]), np.nan)
    for j in range(k):
        members = points[labels == j]
        if len(members):
            means[j] = members.mean(axis=0)
    return means


def _sse_about(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    resid = points - centers[labels]
    return math.fsum((resid * resid).ravel())


def compute_sse(ds, assignment, k: int) -> tuple[float, np.ndarray]:
    """Within-cluster sum of squares around the cluster means.

    Returns ``(sse, centroids)``. Every index in ``range(k)`` must be used.
    """
    pts = as_points(ds)
    labels = check_assignment(assignment, pts.shape[0], k)
    centroids = cluster_means(pts, labels, k)
    return _sse_about(pts, labels, centroids), centroids


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    b = a if b is None else b
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def compute_sse_pairwise(ds, assignment, k: int) -> float:
    """Same objective through squared pairwise distances.

    Each cluster contributes the sum over all ordered pairs (including i == i')
    divided by twice its size.
    """
    pts = as_points(ds)
    labels = check_assignment(assignment, pts.shape[0], k)
    total = []
    for j in range(k):
        members = pts[labels == j]
        total.append(math.fsum(pairwise_sq_dists(members).ravel()) / (2 * len(members)))
    return math.fsum(total)


@dataclass(frozen=True, eq=False)
class Clustering:
    assignment: np.ndarray
    k: int
    centroids: np.ndarray
    sse: float

    @classmethod
    def from_assignment(cls, ds, assignment, k: int) -> "Clustering":
        pts = as_points(ds)
        labels = check_assignment(assignment, pts.shape[0], k)
        sse, centroids = compute_sse(pts, labels, k)
        labels = labels.copy()
        labels.setflags(write=False)
        centroids.setflags(write=False)
        return cls(labels, k, centroids, sse)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)


def _anticluster_labels(anticlusters, n: int) -> tuple[np.ndarray, int]:
    labels = getattr(anticlusters, "assignment", anticlusters)
    labels = np.asarray(labels)
    t = getattr(anticlusters, "t", None)
    if t is None:
        t = int(labels.max()) + 1 if labels.size else 0
    labels = check_assignment(labels, n, t, allow_empty=True)
    return labels, int(t)


@dataclass(frozen=True, eq=False)
class RestrictedClustering:
    """The cells A_jt = C_j ∩ S_t of a clustering against a partition.

    Empty cells have size 0 and a NaN mean; they contribute nothing.
    """

    cells: list = field(repr=False)  # cells[j][t] -> sorted point indices
    cell_sizes: np.ndarray  # (k, t)
    cell_means: np.ndarray  # (k, t, d)
    cell_sse: np.ndarray  # (k, t)

    @property
    def k(self) -> int:
        return self.cell_sizes.shape[0]

    @property
    def t(self) -> int:
        return self.cell_sizes.shape[1]

    def subset_sse(self) -> np.ndarray:
        """f(P restricted to S_t) for every t."""
        return np.array([math.fsum(self.cell_sse[:, t]) for t in range(self.t)])


def restrict(ds, clustering: Clustering, anticlusters) -> RestrictedClustering:
    pts = as_points(ds)
    n = pts.shape[0]
    if clustering.assignment.shape[0] != n:
        raise DimensionMismatchError("clustering and dataset sizes differ")
    parts, t = _anticluster_labels(anticlusters, n)
    k = clustering.k
    sizes = np.zeros((k, t), dtype=np.int64)
    means = np.full((k, t, pts.shape[1]), np.nan)
    sse = np.zeros((k, t))
    cells = [[None] * t for _ in range(k)]
    for j in range(k):
        in_j = clustering.assignment == j
        for s in range(t):
            idx = np.flatnonzero(in_j & (parts == s))
            cells[j][s] = idx
            sizes[j, s] = len(idx)
            if len(idx):
                members = pts[idx]
                means[j, s] = members.mean(axis=0)
                resid = members - means[j, s]
                sse[j, s] = math.fsum((resid * resid).ravel())
    return RestrictedClustering(cells, sizes, means, sse)


def decomposition_identity(ds, clustering: Clustering, anticlusters):
    """Split f(P) into within-cell and between-cell parts.

    Returns ``(withins, between, residual)`` where ``withins`` and ``between`` are
    (k, t) arrays and ``residual = f(P) - sum(withins) - sum(between)``.
    """
    pts = as_points(ds)
    rc = restrict(pts, clustering, anticlusters)
    between = np.zeros_like(rc.cell_sse)
    for j in range(rc.k):
        for s in range(rc.t):
            if rc.cell_sizes[j, s] > 0:
                delta = rc.cell_means[j, s] - clustering.centroids[j]
                between[j, s] = rc.cell_sizes[j, s] * float(delta @ delta)
    residual = clustering.sse - math.fsum(
        list(rc.cell_sse.ravel()) + list(between.ravel())
    )
    return rc.cell_sse, between, residual


def gap_terms(ds, clustering: Clustering, anticlusters, subproblem_values) -> tuple[float, float]:
    """Per-subset suboptimality and between-subset dispersion of a partition.

    ``subproblem_values[t]`` is an optimum, or lower bound, for subset t.
    """
    withins, between, _ = decomposition_identity(ds, clustering, anticlusters)
    values = np.asarray(subproblem_values, dtype=np.float64)
    if values.shape != (withins.shape[1],):
        raise ValueError(
            f"expected {withins.shape[1]} subproblem values, got {values.shape[0] if values.ndim else 'scalar'}"
        )
    per_subset = [math.fsum(withins[:, s]) - values[s] for s in range(withins.shape[1])]
    return math.fsum(per_subset), math.fsum(between.ravel())
