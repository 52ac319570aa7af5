import numpy as np
import pytest

from msscval.core import Clustering
from msscval.data import make_replicas

GROUP_CENTERS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])


def replica_instance(seed=7, copies=4, per_group=4, spread=1.0):
    """``copies`` identical copies of a pattern of 4 well-separated groups."""
    rng = np.random.default_rng(seed)
    base = np.vstack([c + rng.normal(0.0, spread, (per_group, 2)) for c in GROUP_CENTERS])
    base_labels = np.repeat(np.arange(len(GROUP_CENTERS)), per_group)
    ds, labels = make_replicas(base, base_labels, copies)
    return ds, labels, base, base_labels


def packed_partition(points, labels, k, t):
    """Anticlusters built from neighbouring same-cluster points: each cluster is
    sorted by its coordinates and cut into t consecutive chunks."""
    out = np.empty(len(points), dtype=np.int64)
    for j in range(k):
        members = np.flatnonzero(labels == j)
        order = np.lexsort(points[members].T[::-1])
        for s, chunk in enumerate(np.array_split(members[order], t)):
            out[chunk] = s
    return out


def balanced_partition(n_by_cluster_labels, t, rng):
    """Random partition with every cluster dealt evenly over t parts."""
    labels = np.asarray(n_by_cluster_labels)
    out = np.empty(len(labels), dtype=np.int64)
    for j in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == j))
        for s in range(t):
            out[members[s::t]] = s
    return out


@pytest.fixture
def replica():
    ds, labels, base, base_labels = replica_instance()
    return ds, Clustering.from_assignment(ds, labels, 4), base, base_labels


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
