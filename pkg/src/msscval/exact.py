"""Exact MSSC on small point sets.

``solve`` is a depth-first branch-and-bound over point-to-cluster prefixes. A
node's bound is the SSE of its assigned prefix plus the optimum of the points
still unassigned; those suffix optima are produced by solving growing suffixes
of the search order first (repetitive branch-and-bound). The search runs in a
compiled kernel that can be paused and resumed, so a wall-clock budget is
honoured and an interrupted search still yields a valid lower bound: the
smallest bound over its open nodes.

``brute_force`` enumerates every partition and exists to check ``solve``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import as_points, compute_sse, pairwise_sq_dists
from .kmeans import KMeansConfig, multistart

EXACT = "exact"
ANYTIME = "anytime"
FAILED = "failed"

BRUTE_FORCE_MAX_N = 14
BRUTE_FORCE_MAX_K = 4
NODE_CHUNK = 20_000
INCUMBENT_RESTARTS = 10


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class SubproblemResult:
    value_lb: float
    value_ub: float
    status: str
    nodes_explored: int = 0
    time_spent: float = 0.0
    labels: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.value_lb > self.value_ub + 1e-9:
            raise ValueError(f"lower bound {self.value_lb} exceeds upper bound {self.value_ub}")


@dataclass(frozen=True)
class BnBNode:
    """Prefix assignment with per-cluster sufficient statistics.

    Reference model of the search state used by the compiled kernel.
    """

    prefix: tuple
    counts: np.ndarray = field(compare=False)
    sums: np.ndarray = field(compare=False)
    sqnorms: np.ndarray = field(compare=False)

    @classmethod
    def root(cls, k: int, d: int) -> "BnBNode":
        return cls((), np.zeros(k, dtype=np.int64), np.zeros((k, d)), np.zeros(k))

    @property
    def partial_sse(self) -> float:
        used = self.counts > 0
        s = self.sums[used]
        return float(np.sum(self.sqnorms[used] - np.einsum("ij,ij->i", s, s) / self.counts[used]))

    def child(self, point, cluster: int) -> "BnBNode":
        p = np.asarray(point, dtype=np.float64)
        counts = self.counts.copy()
        sums = self.sums.copy()
        sqnorms = self.sqnorms.copy()
        counts[cluster] += 1
        sums[cluster] += p
        sqnorms[cluster] += p @ p
        return BnBNode(self.prefix + (cluster,), counts, sums, sqnorms)


def _restricted_growth_strings(n: int, k: int) -> np.ndarray:
    """All labelings with point 0 in cluster 0, clusters opened in order and
    exactly k clusters used."""
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for pos in range(1, n):
        rem_after = n - pos - 1
        blocks, tops = [], []
        for v in range(k):
            new_top = np.maximum(top, v)
            keep = (v <= top + 1) & (k - (new_top.astype(np.int64) + 1) <= rem_after)
            if keep.any():
                blocks.append(np.hstack([rows[keep], np.full((keep.sum(), 1), v, np.int8)]))
                tops.append(new_top[keep])
        rows = np.vstack(blocks)
        top = np.concatenate(tops)
    return rows[top == k - 1]


def brute_force(ds_subset, k: int, chunk: int = 200_000) -> tuple[float, np.ndarray]:
    """Optimal SSE and assignment by enumerating every k-partition."""
    pts = as_points(ds_subset)
    n = pts.shape[0]
    if n > BRUTE_FORCE_MAX_N or k > BRUTE_FORCE_MAX_K:
        raise SizeLimitError(
            f"brute force is limited to N <= {BRUTE_FORCE_MAX_N}, K <= {BRUTE_FORCE_MAX_K}"
        )
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    labelings = _restricted_growth_strings(n, k)
    sqn = np.einsum("ij,ij->i", pts, pts)
    best_val, best_row = np.inf, 0
    for start in range(0, len(labelings), chunk):
        block = labelings[start:start + chunk]
        sse = np.zeros(len(block))
        for c in range(k):
            mask = (block == c).astype(np.float64)
            cnt = mask.sum(axis=1)
            s = mask @ pts
            sse += mask @ sqn - np.einsum("ij,ij->i", s, s) / cnt
        i = int(np.argmin(sse))
        if sse[i] < best_val:
            best_val, best_row = sse[i], start + i
    labels = labelings[best_row].astype(np.int64)
    return compute_sse(pts, labels, k)[0], labels


def point_order(ds_subset, k: int | None = None) -> np.ndarray:
    """Greedy max-min dispersion order: the farthest pair first, then
    repeatedly the point farthest from everything already chosen."""
    pts = as_points(ds_subset)
    n = pts.shape[0]
    if n <= 1:
        return np.arange(n)
    dist = pairwise_sq_dists(pts)
    if dist.max() <= 0:
        return np.arange(n)
    i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
    order = [min(i, j), max(i, j)]
    nearest = np.minimum(dist[i], dist[j])
    chosen = np.zeros(n, dtype=bool)
    chosen[order] = True
    while len(order) < n:
        cand = np.where(chosen, -1.0, nearest)
        nxt = int(np.argmax(cand))
        order.append(nxt)
        chosen[nxt] = True
        nearest = np.minimum(nearest, dist[nxt])
    return np.asarray(order, dtype=np.int64)


@njit(cache=True, nogil=True)
def _expand(X, k, depth, counts_at, sums_at, partial, suffix_lb, inc,
            child_c, child_b, child_inc, n_child, next_child):
    n, d = X.shape
    used = 0
    while used < k and counts_at[depth, used] > 0:
        used += 1
    rem_after = n - depth - 1
    m = 0
    top = used + 1 if used < k else k
    for c in range(top):
        if c < used:
            cnt = counts_at[depth, c]
            dist = 0.0
            for a in range(d):
                diff = X[depth, a] - sums_at[depth, c, a] / cnt
                dist += diff * diff
            step = cnt / (cnt + 1.0) * dist
            used_after = used
        else:
            step = 0.0
            used_after = used + 1
        if k - used_after > rem_after:
            continue
        b = partial[depth] + step + suffix_lb[rem_after]
        if b >= inc[0]:
            continue
        pos = m
        while pos > 0 and child_b[depth, pos - 1] > b:
            child_b[depth, pos] = child_b[depth, pos - 1]
            child_c[depth, pos] = child_c[depth, pos - 1]
            child_inc[depth, pos] = child_inc[depth, pos - 1]
            pos -= 1
        child_b[depth, pos] = b
        child_c[depth, pos] = c
        child_inc[depth, pos] = step
        m += 1
    n_child[depth] = m
    next_child[depth] = 0


@njit(cache=True, nogil=True)
def _search(X, k, suffix_lb, state, labels, counts_at, sums_at, partial,
            child_c, child_b, child_inc, n_child, next_child, inc, inc_labels, max_steps):
    """Advance the depth-first search by at most ``max_steps`` node expansions.

    ``state[0]`` holds the current depth (-1 once the tree is exhausted) and
    ``state[1]`` whether the root has been expanded.
    """
    n, d = X.shape
    if state[1] == 0:
        state[1] = 1
        state[0] = 0
        partial[0] = 0.0
        counts_at[0, :] = 0
        sums_at[0, :, :] = 0.0
        _expand(X, k, 0, counts_at, sums_at, partial, suffix_lb, inc,
                child_c, child_b, child_inc, n_child, next_child)
    depth = state[0]
    steps = 0
    while depth >= 0:
        if steps >= max_steps:
            state[0] = depth
            return steps
        i = next_child[depth]
        if i >= n_child[depth] or child_b[depth, i] >= inc[0]:
            next_child[depth] = n_child[depth]
            depth -= 1
            continue
        next_child[depth] = i + 1
        c = child_c[depth, i]
        labels[depth] = c
        partial[depth + 1] = partial[depth] + child_inc[depth, i]
        steps += 1
        if depth + 1 == n:
            if partial[n] < inc[0]:
                inc[0] = partial[n]
                inc_labels[:] = labels
            continue
        counts_at[depth + 1, :] = counts_at[depth, :]
        sums_at[depth + 1, :, :] = sums_at[depth, :, :]
        counts_at[depth + 1, c] += 1
        for a in range(d):
            sums_at[depth + 1, c, a] += X[depth, a]
        depth += 1
        _expand(X, k, depth, counts_at, sums_at, partial, suffix_lb, inc,
                child_c, child_b, child_inc, n_child, next_child)
    state[0] = -1
    return steps


@njit(cache=True, nogil=True)
def _open_bound(state, n_child, next_child, child_b, inc):
    lb = inc[0]
    for dd in range(state[0] + 1):
        i = next_child[dd]
        if i < n_child[dd] and child_b[dd, i] < lb:
            lb = child_b[dd, i]
    return lb


class _Stage:
    """Resumable search over one point sequence."""

    def __init__(self, X, k, suffix_lb, inc_value, inc_labels):
        n, d = X.shape
        self.X = np.ascontiguousarray(X)
        self.k = k
        self.suffix_lb = suffix_lb
        self.state = np.zeros(2, dtype=np.int64)
        self.labels = np.zeros(n, dtype=np.int64)
        self.counts_at = np.zeros((n + 1, k), dtype=np.int64)
        self.sums_at = np.zeros((n + 1, k, d))
        self.partial = np.zeros(n + 1)
        self.child_c = np.zeros((n, k), dtype=np.int64)
        self.child_b = np.zeros((n, k))
        self.child_inc = np.zeros((n, k))
        self.n_child = np.zeros(n, dtype=np.int64)
        self.next_child = np.zeros(n, dtype=np.int64)
        self.inc = np.array([inc_value])
        self.inc_labels = np.asarray(inc_labels, dtype=np.int64).copy()
        self.nodes = 0

    @property
    def done(self) -> bool:
        return self.state[1] == 1 and self.state[0] < 0

    def advance(self, max_steps: int) -> None:
        self.nodes += _search(
            self.X, self.k, self.suffix_lb, self.state, self.labels, self.counts_at,
            self.sums_at, self.partial, self.child_c, self.child_b, self.child_inc,
            self.n_child, self.next_child, self.inc, self.inc_labels, max_steps,
        )

    def lower_bound(self) -> float:
        if self.state[1] == 0:
            return float(self.suffix_lb[len(self.X) - 1])
        return float(_open_bound(self.state, self.n_child, self.next_child, self.child_b, self.inc))


def _sse(points, labels) -> float:
    total = 0.0
    for c in np.unique(labels):
        members = points[labels == c]
        total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total


def _extend(X, prev_labels, k):
    """Prepend X[0] to a solution of X[1:] in its cheapest position."""
    used = int(prev_labels.max()) + 1 if len(prev_labels) else 0
    if used < k:
        c = used
    else:
        rest = X[1:]
        costs = []
        for j in range(k):
            members = rest[prev_labels == j]
            cnt = len(members)
            mu = members.mean(axis=0)
            costs.append(cnt / (cnt + 1.0) * float(np.sum((X[0] - mu) ** 2)))
        c = int(np.argmin(costs))
    return np.concatenate([[c], prev_labels]).astype(np.int64)


_warm = False


def _warmup():
    global _warm
    if not _warm:
        X = np.array([[0.0], [1.0], [5.0]])
        st = _Stage(X, 2, np.zeros(4), np.inf, np.zeros(3, dtype=np.int64))
        st.advance(100)
        st.lower_bound()
        _warm = True


def solve(ds_subset, k: int, initial_ub: float = np.inf, time_budget: float = 60.0,
          initial_labels=None, order=None, repetitive: bool = True, seed: int = 0,
          node_chunk: int = NODE_CHUNK) -> SubproblemResult:
    """Exact (or, under a budget, anytime) MSSC for one point set.

    ``initial_ub`` prunes from the start; ``initial_labels``, when they use all
    k clusters, seed the incumbent next to the best of a few k-means runs.
    With ``repetitive=False`` only the prefix SSE bounds nodes.
    """
    if time_budget <= 0:
        raise ValueError("time_budget must be positive")
    _warmup()
    start = time.perf_counter()
    deadline = start + time_budget
    pts = np.ascontiguousarray(as_points(ds_subset))
    n = pts.shape[0]
    if n == 0:
        raise ValueError("subset must be non-empty")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k == 1 or k == n:
        labels = np.zeros(n, dtype=np.int64) if k == 1 else np.arange(n)
        value = compute_sse(pts, labels, k)[0]
        return SubproblemResult(value, value, EXACT, 0, time.perf_counter() - start, labels)

    candidates = [multistart(pts, KMeansConfig(k, restarts=INCUMBENT_RESTARTS, seed=seed)).assignment]
    if initial_labels is not None:
        lab = np.asarray(initial_labels, dtype=np.int64)
        if lab.shape == (n,) and lab.min() >= 0 and lab.max() < k and len(np.unique(lab)) == k:
            candidates.append(lab)
    values = [compute_sse(pts, lab, k)[0] for lab in candidates]
    best = int(np.argmin(values))
    ub_value, ub_labels = values[best], candidates[best]

    order = point_order(pts, k) if order is None else np.asarray(order, dtype=np.int64)
    X = pts[order]
    suffix_lb = np.zeros(n + 1)
    stage_sizes = range(k + 1, n + 1) if repetitive else [n]
    prev = np.arange(k, dtype=np.int64)  # optimum of the last k points
    nodes = 0
    for m in stage_sizes:
        Xs = X[n - m:]
        if repetitive:
            seed_labels = _extend(Xs, prev, k)
            seed_value = _sse(Xs, seed_labels)
        else:
            seed_labels, seed_value = np.zeros(m, dtype=np.int64), np.inf
        if m == n:
            pruned = min(ub_value, initial_ub)
            if pruned <= seed_value:
                seed_labels, seed_value = ub_labels[order], pruned
        stage = _Stage(Xs, k, suffix_lb, seed_value, seed_labels)
        while not stage.done:
            if time.perf_counter() >= deadline:
                break
            stage.advance(node_chunk)
        nodes += stage.nodes
        if not stage.done:
            if m == n:
                found = np.empty(n, dtype=np.int64)
                found[order] = stage.inc_labels
                if len(np.unique(found)) == k:
                    found_value = compute_sse(pts, found, k)[0]
                    if found_value < ub_value:
                        ub_value, ub_labels = found_value, found
            lb = max(stage.lower_bound(), float(suffix_lb[m - 1]))
            lb = min(lb, ub_value)
            return SubproblemResult(lb, ub_value, ANYTIME, nodes,
                                    time.perf_counter() - start, ub_labels)
        suffix_lb[m] = stage.inc[0]
        prev = stage.inc_labels

    found = np.empty(n, dtype=np.int64)
    found[order] = prev
    if len(np.unique(found)) == k:
        found_value = compute_sse(pts, found, k)[0]
        if found_value < ub_value:
            ub_value, ub_labels = found_value, found
    lb = min(float(suffix_lb[n]), initial_ub, ub_value)
    elapsed = time.perf_counter() - start
    status = EXACT if ub_value - lb <= 1e-9 * max(1.0, ub_value) else ANYTIME
    return SubproblemResult(lb, ub_value, status, nodes, elapsed, ub_labels)
