"""Anticlustering partitions: construction, evaluation and swap refinement.

An anticlustering partition splits the data into T subsets that each look like
a miniature of the whole dataset. Every cluster of the input clustering is
dealt evenly over the subsets, so each subset holds ⌊|C_j|/T⌋ or ⌈|C_j|/T⌉
points of cluster j.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Clustering, as_points
from .kmeans import KMeansConfig, seeded_run

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10**6
ASSEMBLY_TIME_LIMIT = 60.0

EPS_GAMMA = "eps_gamma"
TIMEOUT = "timeout"
NO_IMPROVEMENT = "no_improvement"


class PartitionError(ValueError):
    pass


@dataclass
class AnticlusterPartition:
    """A partition into T anticlusters together with its LB+ evaluation.

    ``fits[t]`` is the seeded k-means result on ``subsets[t]`` (sorted point
    indices); ``cell_values[t, j]`` is the SSE of its cluster j and
    ``subset_values[t]`` the total for anticluster t.
    """

    assignment: np.ndarray
    t: int
    cells: list = field(repr=False)  # cells[j][t]: points of input cluster j in anticluster t
    subsets: list = field(repr=False)
    fits: list = field(repr=False)
    cell_values: np.ndarray = field(repr=False)
    subset_values: np.ndarray = field(repr=False)
    lb_plus: float = 0.0

    def gamma_plus(self, ub: float) -> float:
        return (ub - self.lb_plus) / ub

    def copy(self) -> "AnticlusterPartition":
        return AnticlusterPartition(
            self.assignment.copy(), self.t,
            [[c.copy() for c in row] for row in self.cells],
            [s.copy() for s in self.subsets], list(self.fits),
            self.cell_values.copy(), self.subset_values.copy(), self.lb_plus,
        )


@dataclass(frozen=True)
class AssemblyAssignment:
    """``perm[j, t]`` is the split of cluster j placed in anticluster t."""

    perm: np.ndarray
    objective: float
    exhaustive: bool = False

    @property
    def x(self) -> np.ndarray:
        """Binary tensor x[j, m, t] = 1 iff split m of cluster j goes to anticluster t."""
        k, t = self.perm.shape
        out = np.zeros((k, t, t), dtype=np.int8)
        for j in range(k):
            out[j, self.perm[j], np.arange(t)] = 1
        return out


def split_clusters(clustering: Clustering, t: int, rng: np.random.Generator) -> list[list[np.ndarray]]:
    """Shuffle each cluster and deal its points round-robin into t splits."""
    if t < 2:
        raise PartitionError(f"need at least 2 anticlusters, got {t}")
    splits = []
    for j in range(clustering.k):
        members = clustering.members(j)
        if len(members) < t:
            raise PartitionError(
                f"cluster {j} has {len(members)} points, fewer than T={t}"
            )
        perm = rng.permutation(members)
        splits.append([np.sort(perm[m::t]) for m in range(t)])
    return splits


def pairwise_split_distance(split_a, split_b) -> float:
    """Sum of squared distances over all cross pairs of the two point sets."""
    a = as_points(split_a)
    b = as_points(split_b)
    sa, sb = a.sum(axis=0), b.sum(axis=0)
    value = len(b) * float(np.sum(a * a)) + len(a) * float(np.sum(b * b)) - 2.0 * float(sa @ sb)
    return max(value, 0.0)


def split_distances(points: np.ndarray, splits) -> np.ndarray:
    """(K, K, T, T) array; entry [j, j2, m, m2] for j < j2 only."""
    k, t = len(splits), len(splits[0])
    dist = np.zeros((k, k, t, t))
    for j in range(k):
        for j2 in range(j + 1, k):
            for m in range(t):
                for m2 in range(t):
                    dist[j, j2, m, m2] = pairwise_split_distance(
                        points[splits[j][m]], points[splits[j2][m2]]
                    )
    return dist


def assembly_objective(perm: np.ndarray, distances: np.ndarray) -> float:
    k = perm.shape[0]
    total = 0.0
    for j in range(k):
        for j2 in range(j + 1, k):
            total += float(distances[j, j2, perm[j], perm[j2]].sum())
    return total


def _exhaustive(distances: np.ndarray, k: int, t: int) -> tuple[np.ndarray, float]:
    perms = np.array(list(itertools.permutations(range(t))), dtype=np.int64)
    ident = np.arange(t)
    best_val, best = -np.inf, None
    last = k - 1
    for middle in itertools.product(range(len(perms)), repeat=k - 2):
        fixed = [ident] + [perms[i] for i in middle]
        base = 0.0
        for j in range(len(fixed)):
            for j2 in range(j + 1, len(fixed)):
                base += float(distances[j, j2, fixed[j], fixed[j2]].sum())
        scores = np.full(len(perms), base)
        for j, pj in enumerate(fixed):
            rows = distances[j, last][pj]  # rows[t, m]: split pj[t] of j vs split m of last
            scores += rows[ident[None, :], perms].sum(axis=1)
        i = int(np.argmax(scores))
        if scores[i] > best_val:
            best_val = float(scores[i])
            best = np.vstack(fixed + [perms[i]])
    return best, best_val


def _greedy(distances: np.ndarray, k: int, t: int, deadline: float) -> tuple[np.ndarray, float]:
    perm = np.zeros((k, t), dtype=np.int64)
    perm[0] = np.arange(t)
    for j in range(1, k):
        gain = np.zeros((t, t))
        for j0 in range(j):
            gain += distances[j0, j][perm[j0]]
        _, cols = linear_sum_assignment(gain, maximize=True)
        perm[j] = cols
    value = assembly_objective(perm, distances)
    improved = True
    while improved and time.perf_counter() < deadline:
        improved = False
        for j in range(k):
            for a in range(t):
                for b in range(a + 1, t):
                    trial = perm.copy()
                    trial[j, [a, b]] = trial[j, [b, a]]
                    v = assembly_objective(trial, distances)
                    if v > value + 1e-12 * max(1.0, abs(value)):
                        perm, value, improved = trial, v, True
    return perm, value


def assemble(splits, distances: np.ndarray, time_limit: float = ASSEMBLY_TIME_LIMIT) -> AssemblyAssignment:
    """Choose which split of each cluster joins which anticluster so that the
    summed cross-cluster split distances inside anticlusters is maximal."""
    k, t = len(splits), len(splits[0])
    if k == 1:
        return AssemblyAssignment(np.arange(t)[None, :], 0.0, True)
    if math.factorial(t) ** (k - 1) <= EXHAUSTIVE_LIMIT:
        perm, value = _exhaustive(distances, k, t)
        return AssemblyAssignment(perm, value, True)
    perm, value = _greedy(distances, k, t, time.perf_counter() + time_limit)
    return AssemblyAssignment(perm, value, False)


def partition_from_assembly(n: int, splits, assembly: AssemblyAssignment) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    k, t = assembly.perm.shape
    for j in range(k):
        for s in range(t):
            labels[splits[j][assembly.perm[j, s]]] = s
    return labels


def _cell_values(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(k)
    for j in range(k):
        members = points[labels == j]
        if len(members):
            resid = members - members.mean(axis=0)
            out[j] = math.fsum((resid * resid).ravel())
    return out


def _fit(points, idx, centroids, config):
    return seeded_run(points[idx], centroids, config)


def evaluate_lb_plus(ds, assignment, clustering: Clustering, config: KMeansConfig | None = None,
                     t: int | None = None) -> AnticlusterPartition:
    """Seeded k-means on every anticluster, started from the input centroids.

    The summed values form LB+, an optimistic estimate of the certified bound.
    """
    points = as_points(ds)
    labels = np.asarray(assignment, dtype=np.int64)
    t = int(labels.max()) + 1 if t is None else t
    k = clustering.k
    subsets, fits = [], []
    cell_values = np.zeros((t, k))
    subset_values = np.zeros(t)
    for s in range(t):
        idx = np.flatnonzero(labels == s)
        if len(idx) == 0:
            raise PartitionError(f"anticluster {s} is empty")
        fit = _fit(points, idx, clustering.centroids, config)
        subsets.append(idx)
        fits.append(fit)
        cell_values[s] = _cell_values(points[idx], fit.labels, k)
        subset_values[s] = fit.value
    cells = [[np.flatnonzero((clustering.assignment == j) & (labels == s)) for s in range(t)]
             for j in range(k)]
    return AnticlusterPartition(labels.copy(), t, cells, subsets, fits, cell_values,
                                subset_values, math.fsum(subset_values))


def initialize(ds, clustering: Clustering, t: int, r: int, rng: np.random.Generator,
               config: KMeansConfig | None = None,
               assembly_time_limit: float = ASSEMBLY_TIME_LIMIT) -> AnticlusterPartition:
    """Build r candidate partitions (random splits + assembly) and keep the one
    with the largest LB+."""
    if r < 1:
        raise ValueError("r must be >= 1")
    points = as_points(ds)
    best = None
    for _ in range(r):
        splits = split_clusters(clustering, t, rng)
        assembly = assemble(splits, split_distances(points, splits), assembly_time_limit)
        labels = partition_from_assembly(len(points), splits, assembly)
        cand = evaluate_lb_plus(points, labels, clustering, config, t)
        if best is None or cand.lb_plus > best.lb_plus:
            best = cand
    return best


def swap_refine(ds, partition: AnticlusterPartition, clustering: Clustering, eps_gamma: float,
                time_limit: float, config: KMeansConfig | None = None):
    """Exchange same-cluster points between anticlusters while LB+ improves.

    Returns ``(partition, trace, stop_reason)``; ``trace`` lists LB+ after each
    accepted swap and is strictly increasing. The input partition is not
    modified.
    """
    points = as_points(ds)
    part = partition.copy()
    ub = clustering.sse
    trace: list[float] = []
    deadline = time.perf_counter() + time_limit
    k = clustering.k

    def gamma():
        return (ub - part.lb_plus) / ub if ub > 0 else 0.0

    if gamma() <= eps_gamma:
        return part, trace, EPS_GAMMA
    dist_to_centroid = np.zeros(len(points))
    for j in range(k):
        members = clustering.members(j)
        diff = points[members] - clustering.centroids[j]
        dist_to_centroid[members] = np.einsum("ij,ij->i", diff, diff)

    while True:
        accepted_in_sweep = False
        for j in range(k):
            contrib = part.cell_values[:, j]
            ascending = np.argsort(contrib, kind="stable")
            descending = np.argsort(-contrib, kind="stable")
            near_first = []
            far_first = []
            for s in range(part.t):
                cell = part.cells[j][s]
                order = np.argsort(dist_to_centroid[cell], kind="stable")
                near_first.append(cell[order])
                order = np.argsort(-dist_to_centroid[cell], kind="stable")
                far_first.append(cell[order])
            swap = _find_swap(points, part, clustering, config, j, ascending, descending,
                              near_first, far_first, deadline)
            if swap is None:
                return part, trace, TIMEOUT
            if swap is False:
                continue
            _apply_swap(points, part, clustering, j, *swap)
            trace.append(part.lb_plus)
            accepted_in_sweep = True
            if gamma() <= eps_gamma:
                return part, trace, EPS_GAMMA
        if not accepted_in_sweep:
            return part, trace, NO_IMPROVEMENT


def _find_swap(points, part, clustering, config, j, ascending, descending, near_first,
               far_first, deadline):
    """First improving exchange for cluster j, False if none, None on timeout."""
    for s in ascending:
        for p in near_first[s]:
            for s2 in descending:
                if s2 == s:
                    continue
                for q in far_first[s2]:
                    if time.perf_counter() >= deadline:
                        return None
                    idx_s = _swapped(part.subsets[s], p, q)
                    idx_s2 = _swapped(part.subsets[s2], q, p)
                    fit_s = _fit(points, idx_s, clustering.centroids, config)
                    fit_s2 = _fit(points, idx_s2, clustering.centroids, config)
                    others = [part.subset_values[u] for u in range(part.t) if u != s and u != s2]
                    total = math.fsum(others + [fit_s.value, fit_s2.value])
                    if total > part.lb_plus:
                        return int(s), int(s2), int(p), int(q), idx_s, idx_s2, fit_s, fit_s2
    return False


def _swapped(idx: np.ndarray, out: int, into: int) -> np.ndarray:
    new = idx.copy()
    new[np.searchsorted(idx, out)] = into
    new.sort()
    return new


def _apply_swap(points, part, clustering, j, s, s2, p, q, idx_s, idx_s2, fit_s, fit_s2):
    k = clustering.k
    part.assignment[p] = s2
    part.assignment[q] = s
    part.cells[j][s] = np.sort(np.append(part.cells[j][s][part.cells[j][s] != p], q))
    part.cells[j][s2] = np.sort(np.append(part.cells[j][s2][part.cells[j][s2] != q], p))
    for u, idx, fit in ((s, idx_s, fit_s), (s2, idx_s2, fit_s2)):
        part.subsets[u] = idx
        part.fits[u] = fit
        part.cell_values[u] = _cell_values(points[idx], fit.labels, k)
        part.subset_values[u] = fit.value
    part.lb_plus = math.fsum(part.subset_values)
