import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msscval.anticluster import (
    EPS_GAMMA,
    NO_IMPROVEMENT,
    TIMEOUT,
    PartitionError,
    _greedy,
    assemble,
    assembly_objective,
    evaluate_lb_plus,
    initialize,
    pairwise_split_distance,
    partition_from_assembly,
    split_clusters,
    split_distances,
    swap_refine,
)
from msscval.core import Clustering
from msscval.kmeans import KMeansConfig, multistart


def cross_sum_oracle(a, b):
    return sum(float(np.sum((p - q) ** 2)) for p in np.asarray(a) for q in np.asarray(b))


def clustered(n_per=12, k=3, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10, 10, size=(k, 2))
    labels = np.repeat(np.arange(k), n_per)
    pts = centers[labels] + spread * rng.normal(size=(len(labels), 2))
    return pts, Clustering.from_assignment(pts, labels, k)


@pytest.mark.parametrize("size", [4, 5])
def test_split_sizes_are_balanced(size):
    t = 2
    pts = np.arange(3 * size, dtype=float)[:, None]
    cl = Clustering.from_assignment(pts, np.repeat(np.arange(3), size), 3)
    splits = split_clusters(cl, t, np.random.default_rng(0))
    for j, row in enumerate(splits):
        sizes = sorted(len(s) for s in row)
        assert sizes == sorted([size // t + (m < size % t) for m in range(t)])
        np.testing.assert_array_equal(np.sort(np.concatenate(row)), cl.members(j))


def test_split_is_deterministic_for_a_seed():
    _, cl = clustered()
    a = split_clusters(cl, 3, np.random.default_rng(5))
    b = split_clusters(cl, 3, np.random.default_rng(5))
    for ra, rb in zip(a, b):
        for sa, sb in zip(ra, rb):
            np.testing.assert_array_equal(sa, sb)


def test_split_errors():
    _, cl = clustered(n_per=3)
    with pytest.raises(PartitionError):
        split_clusters(cl, 1, np.random.default_rng(0))
    with pytest.raises(PartitionError):
        split_clusters(cl, 4, np.random.default_rng(0))


def test_pairwise_split_distance_examples():
    assert pairwise_split_distance([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(25.0)
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(5, 3)), rng.normal(size=(7, 3))
    assert pairwise_split_distance(a, b) == pytest.approx(cross_sum_oracle(a, b), rel=1e-12)


def test_assemble_single_cluster():
    pts = np.arange(6.0)[:, None]
    cl = Clustering.from_assignment(pts, np.zeros(6, dtype=int), 1)
    splits = split_clusters(cl, 3, np.random.default_rng(0))
    out = assemble(splits, split_distances(pts, splits))
    np.testing.assert_array_equal(out.perm, [[0, 1, 2]])


def test_assemble_two_clusters_two_splits():
    # cluster 0 splits are near x=0 and x=10, cluster 1 splits near x=1 and x=11;
    # pairing the far halves maximises the cross distances
    pts = np.array([[0.0], [10.0], [1.0], [11.0]])
    splits = [[np.array([0]), np.array([1])], [np.array([2]), np.array([3])]]
    out = assemble(splits, split_distances(pts, splits))
    np.testing.assert_array_equal(out.perm, [[0, 1], [1, 0]])
    assert out.objective == pytest.approx(121.0 + 81.0)
    assert out.exhaustive
    x = out.x
    assert x.shape == (2, 2, 2)
    assert (x.sum(axis=1) == 1).all() and (x.sum(axis=2) == 1).all()


def full_enumeration(distances, k, t):
    best = -np.inf
    for perms in itertools.product(itertools.permutations(range(t)), repeat=k):
        best = max(best, assembly_objective(np.array(perms), distances))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_assembly_matches_full_enumeration(seed):
    pts, cl = clustered(n_per=9, seed=seed, spread=4.0)
    splits = split_clusters(cl, 3, np.random.default_rng(seed))
    dist = split_distances(pts, splits)
    out = assemble(splits, dist)
    assert out.exhaustive
    assert out.objective == pytest.approx(full_enumeration(dist, 3, 3), rel=1e-12)
    assert out.objective == pytest.approx(assembly_objective(out.perm, dist), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_greedy_assembly_never_beats_exhaustive(seed):
    pts, cl = clustered(n_per=12, k=3, seed=seed, spread=4.0)
    splits = split_clusters(cl, 4, np.random.default_rng(seed))
    dist = split_distances(pts, splits)
    exact = assemble(splits, dist)
    perm, value = _greedy(dist, 3, 4, np.inf)
    assert value <= exact.objective + 1e-9
    assert value >= 0.95 * exact.objective
    for row in perm:
        assert sorted(row) == [0, 1, 2, 3]


def test_large_assembly_uses_greedy():
    pts, cl = clustered(n_per=20, k=4, seed=2)
    splits = split_clusters(cl, 10, np.random.default_rng(0))
    out = assemble(splits, split_distances(pts, splits), time_limit=5)
    assert not out.exhaustive
    labels = partition_from_assembly(len(pts), splits, out)
    assert (labels >= 0).all()
    assert (np.bincount(labels) == 8).all()


def test_replica_gap_mostly_closed_by_swaps(replica):
    ds, cl, _, _ = replica
    closed = 0
    for seed in range(5):
        part = initialize(ds, cl, 4, 1, np.random.default_rng(seed), KMeansConfig(4))
        assert part.lb_plus <= cl.sse + 1e-9
        # random splits thin out each group; exchanges rebuild copies of the
        # pattern unless the local search stalls first
        refined, _, stop = swap_refine(ds, part, cl, 1e-6, 60, KMeansConfig(4))
        assert refined.lb_plus >= part.lb_plus
        closed += stop == EPS_GAMMA and refined.lb_plus == pytest.approx(cl.sse, rel=1e-6)
    assert closed >= 4


def test_initialize_partition_is_balanced():
    pts, cl = clustered(n_per=14, k=3, seed=3)
    part = initialize(pts, cl, 4, 2, np.random.default_rng(1))
    for j in range(3):
        sizes = sorted(len(c) for c in part.cells[j])
        assert sizes == [3, 3, 4, 4]
    with pytest.raises(ValueError):
        initialize(pts, cl, 4, 0, np.random.default_rng(1))


def test_evaluate_lb_plus_consistency():
    pts, cl = clustered(n_per=10, seed=4, spread=3.0)
    labels = np.arange(len(pts)) % 3
    part = evaluate_lb_plus(pts, labels, cl)
    np.testing.assert_allclose(part.cell_values.sum(axis=1), part.subset_values, rtol=1e-10)
    assert part.lb_plus == pytest.approx(part.subset_values.sum(), rel=1e-12)
    for s in range(3):
        np.testing.assert_array_equal(part.subsets[s], np.flatnonzero(labels == s))
    with pytest.raises(PartitionError):
        evaluate_lb_plus(pts, labels, cl, t=4)


def single_swap_values(pts, cl, labels):
    """LB+ of every partition one same-cluster exchange away."""
    t = int(labels.max()) + 1
    out = []
    for p in range(len(pts)):
        for q in range(p + 1, len(pts)):
            if cl.assignment[p] != cl.assignment[q] or labels[p] == labels[q]:
                continue
            trial = labels.copy()
            trial[p], trial[q] = labels[q], labels[p]
            out.append(evaluate_lb_plus(pts, trial, cl, t=t).lb_plus)
    return out


def test_swap_refine_stops_at_single_swap_local_optimum():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(8, 2)) * [3.0, 1.0]
    cl = multistart(pts, KMeansConfig(2, restarts=20))
    labels = np.empty(8, dtype=np.int64)
    for j in range(2):
        members = cl.members(j)
        labels[members] = np.arange(len(members)) % 2
    start = evaluate_lb_plus(pts, labels, cl, t=2)
    part, trace, stop = swap_refine(pts, start, cl, 0.0, 30)
    assert stop in (NO_IMPROVEMENT, EPS_GAMMA)
    if stop == NO_IMPROVEMENT:
        assert max(single_swap_values(pts, cl, part.assignment)) <= part.lb_plus
    assert part.lb_plus >= start.lb_plus


@pytest.mark.parametrize("seed", range(3))
def test_swap_refine_trace_and_feasibility(seed):
    pts, cl = clustered(n_per=12, k=3, seed=seed, spread=5.0)
    start = initialize(pts, cl, 3, 1, np.random.default_rng(seed))
    before = start.assignment.copy()
    part, trace, stop = swap_refine(pts, start, cl, 0.0, 20)
    np.testing.assert_array_equal(start.assignment, before)
    assert stop in (NO_IMPROVEMENT, EPS_GAMMA, TIMEOUT)
    assert all(b > a for a, b in zip([start.lb_plus] + trace, trace))
    for j in range(3):
        assert sorted(len(c) for c in part.cells[j]) == [4, 4, 4]
        for s in range(3):
            np.testing.assert_array_equal(
                part.cells[j][s], np.flatnonzero((cl.assignment == j) & (part.assignment == s)))
    # incremental bookkeeping agrees with a fresh evaluation
    fresh = evaluate_lb_plus(pts, part.assignment, cl, t=3)
    assert part.lb_plus == pytest.approx(fresh.lb_plus, rel=1e-12)
    np.testing.assert_allclose(part.cell_values, fresh.cell_values, rtol=1e-10, atol=1e-12)


def test_swap_refine_returns_immediately_within_tolerance(replica):
    ds, cl, _, _ = replica
    copies = np.repeat(np.arange(4), 16)
    start = evaluate_lb_plus(ds, copies, cl)
    part, trace, stop = swap_refine(ds, start, cl, 1e-5, 10)
    assert stop == EPS_GAMMA and trace == []


def test_swap_refine_timeout():
    pts, cl = clustered(n_per=30, k=3, seed=9, spread=6.0)
    start = initialize(pts, cl, 5, 1, np.random.default_rng(0))
    _, _, stop = swap_refine(pts, start, cl, 0.0, 1e-6)
    assert stop == TIMEOUT


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_lb_plus_never_exceeds_upper_bound(seed, t):
    pts, cl = clustered(n_per=8, k=2, seed=seed % 1000, spread=3.0)
    cl = Clustering.from_assignment(pts, multistart(pts, KMeansConfig(2, restarts=5)).assignment, 2)
    if cl.sizes.min() < t:
        return
    part = initialize(pts, cl, t, 2, np.random.default_rng(seed))
    # seeded Lloyd on each subset starts no worse than the restricted clustering
    assert part.lb_plus <= cl.sse * (1 + 1e-9)
