"""Optimality certificates for minimum sum-of-squares clusterings.

A clustering is validated by splitting the data into anticlusters, subsets
that each mirror the whole dataset, and summing exact (or anytime) lower
bounds of the clustering problem on every subset.
"""

from .anticluster import AnticlusterPartition, assemble, evaluate_lb_plus, initialize, swap_refine
from .certify import Certificate, RunConfig, certify_partition, emit_report, parse_report, validate
from .core import Clustering, Dataset, compute_sse, compute_sse_pairwise, decomposition_identity, gap_terms, restrict
from .data import generate_synthetic, ingest_csv
from .exact import SubproblemResult, brute_force, solve
from .kmeans import KMeansConfig, lloyd, multistart, seeded_run

__all__ = [
    "AnticlusterPartition", "Certificate", "Clustering", "Dataset", "KMeansConfig", "RunConfig",
    "SubproblemResult", "assemble", "brute_force", "certify_partition", "compute_sse",
    "compute_sse_pairwise", "decomposition_identity", "emit_report", "evaluate_lb_plus",
    "gap_terms", "generate_synthetic", "ingest_csv", "initialize", "lloyd", "multistart",
    "parse_report", "restrict", "seeded_run", "solve", "swap_refine", "validate",
]
