"""Lloyd's algorithm, k-means++ seeding and the multi-start driver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Clustering, as_points

CONVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iters: int = 100
    restarts: int = 1000
    seed: int = 0
    tolerance: float = CONVERGENCE_TOL

    def __post_init__(self):
        if self.k < 1 or self.max_iters < 1 or self.restarts < 1:
            raise ValueError("k, max_iters and restarts must all be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass(frozen=True, eq=False)
class SubsetFit:
    """Result of a seeded Lloyd run on a subset; clusters may be empty."""

    labels: np.ndarray
    centroids: np.ndarray
    value: float
    iterations: int

    def cell_values(self, points: np.ndarray, k: int) -> np.ndarray:
        out = np.zeros(k)
        for j in range(k):
            members = points[self.labels == j]
            if len(members):
                resid = members - members.mean(axis=0)
                out[j] = float(np.sum(resid * resid))
        return out


@njit(cache=True, nogil=True)
def _sse(points, labels, centroids):
    total = 0.0
    for i in range(points.shape[0]):
        c = labels[i]
        for a in range(points.shape[1]):
            diff = points[i, a] - centroids[c, a]
            total += diff * diff
    return total


@njit(cache=True, nogil=True)
def _lloyd_kernel(points, init, max_iters, tol, repair, trace):
    """Alternate nearest-centroid assignment and mean updates.

    ``trace`` receives the SSE after every mean update. Returns labels,
    centroids and the number of mean updates performed.
    """
    n, d = points.shape
    k = init.shape[0]
    centroids = init.copy()
    labels = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, d))
    updates = 0
    for _ in range(max_iters):
        changed = False
        for i in range(n):
            best = 0
            best_d = np.inf
            for c in range(k):
                dist = 0.0
                for a in range(d):
                    diff = points[i, a] - centroids[c, a]
                    dist += diff * diff
                if dist < best_d:  # strict: ties go to the lowest index
                    best_d = dist
                    best = c
            if labels[i] != best:
                labels[i] = best
                changed = True
        if not changed:
            break

        counts[:] = 0
        sums[:, :] = 0.0
        for i in range(n):
            counts[labels[i]] += 1
            for a in range(d):
                sums[labels[i], a] += points[i, a]
        new = centroids.copy()
        for c in range(k):
            if counts[c] > 0:
                for a in range(d):
                    new[c, a] = sums[c, a] / counts[c]
        if repair:
            for c in range(k):
                if counts[c] > 0:
                    continue
                # move the point farthest from its centroid (among clusters
                # that can spare one) into the empty cluster
                far = -1
                far_d = -1.0
                for i in range(n):
                    if counts[labels[i]] < 2:
                        continue
                    dist = 0.0
                    for a in range(d):
                        diff = points[i, a] - new[labels[i], a]
                        dist += diff * diff
                    if dist > far_d:
                        far_d = dist
                        far = i
                if far < 0:
                    continue
                old = labels[far]
                counts[old] -= 1
                for a in range(d):
                    sums[old, a] -= points[far, a]
                    new[old, a] = sums[old, a] / counts[old]
                labels[far] = c
                counts[c] = 1
                for a in range(d):
                    sums[c, a] = points[far, a]
                    new[c, a] = points[far, a]
        shift = 0.0
        for c in range(k):
            step = 0.0
            for a in range(d):
                diff = new[c, a] - centroids[c, a]
                step += diff * diff
            if step > shift:
                shift = step
        centroids = new
        if updates < trace.shape[0]:
            trace[updates] = _sse(points, labels, centroids)
        updates += 1
        if np.sqrt(shift) < tol:
            break
    return labels, centroids, updates


def _run(points, init, max_iters, tol, repair):
    trace = np.empty(max_iters)
    labels, centroids, updates = _lloyd_kernel(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(init, dtype=np.float64),
        max_iters, tol, repair, trace,
    )
    return labels, centroids, trace[:updates]


def _d2_weights(points: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - chosen[None, :, :]
    return np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1)


def kmeanspp_seed(ds, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding: first centre uniform, the rest proportional to the
    squared distance to the nearest centre chosen so far."""
    points = as_points(ds)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"cannot seed {k} centroids from {n} points")
    idx = [int(rng.integers(n))]
    for _ in range(1, k):
        w = _d2_weights(points, points[idx])
        total = w.sum()
        if total <= 0:
            idx.append(int(rng.integers(n)))
        else:
            idx.append(int(rng.choice(n, p=w / total)))
    return points[idx].copy()


def lloyd(ds, initial_centroids, config: KMeansConfig, trace: list | None = None) -> Clustering:
    """Full-dataset Lloyd run. Empty clusters are repaired, so the result
    always has ``config.k`` non-empty clusters."""
    points = as_points(ds)
    init = np.asarray(initial_centroids, dtype=np.float64)
    if init.ndim != 2 or init.shape[1] != points.shape[1]:
        raise ValueError(f"initial centroids must have shape (k, {points.shape[1]})")
    labels, _, history = _run(points, init, config.max_iters, config.tolerance, True)
    if trace is not None:
        trace.extend(history.tolist())
    return Clustering.from_assignment(points, labels, init.shape[0])


def restart_rngs(seed: int, restarts: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(restarts)
    return [np.random.default_rng(s) for s in children]


def multistart(ds, config: KMeansConfig) -> Clustering:
    """Best of ``config.restarts`` independent k-means++ / Lloyd runs."""
    points = as_points(ds)
    best = None
    for rng in restart_rngs(config.seed, config.restarts):
        init = kmeanspp_seed(points, config.k, rng)
        labels, _, _ = _run(points, init, config.max_iters, config.tolerance, True)
        value = _sse(points, labels, _means(points, labels, config.k))
        if best is None or value < best[0]:
            best = (value, labels)
    return Clustering.from_assignment(points, best[1], config.k)


def _means(points, labels, k):
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k)
    return sums / np.maximum(counts, 1)[:, None]


def seeded_run(points, centroids, config: KMeansConfig | None = None) -> SubsetFit:
    """Lloyd on a subset started from externally supplied centroids.

    Clusters are allowed to empty out; an empty cluster keeps its centroid and
    contributes nothing to the value.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("subset must be non-empty")
    init = np.asarray(centroids, dtype=np.float64)
    max_iters = config.max_iters if config else 100
    tol = config.tolerance if config else CONVERGENCE_TOL
    labels, cents, history = _run(pts, init, max_iters, tol, False)
    value = _sse(pts, labels, cents)
    return SubsetFit(labels, cents, value, len(history))
