"""Acceptance criteria 1-7. Each test records one PASS/FAIL line that is
printed in the pytest terminal summary (and directly when run as a script)."""

import time

import numpy as np
import pytest

from conftest import packed_partition, replica_instance
from msscval.certify import RunConfig, certify_partition, random_balanced_partition, validate
from msscval.core import Clustering, compute_sse, compute_sse_pairwise, decomposition_identity
from msscval.data import generate_synthetic
from msscval.exact import brute_force, solve
from msscval.kmeans import KMeansConfig, multistart

pytestmark = pytest.mark.slow

RESULTS = []

SYNTH_N, SYNTH_K, SYNTH_SIGMA, SYNTH_T = 400, 3, 0.5, 10
SUBSET_BUDGET = 120.0


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def synthetic_instance(seed):
    ds, _ = generate_synthetic(SYNTH_N, SYNTH_K, SYNTH_SIGMA, np.random.default_rng(seed))
    return ds, multistart(ds, KMeansConfig(SYNTH_K, seed=seed))


def synthetic_config(seed=0):
    return RunConfig(SYNTH_K, SYNTH_T, certify_budget=SUBSET_BUDGET, seed=seed)


@pytest.fixture(scope="module")
def synthetic_run():
    start = time.perf_counter()
    ds, cl = synthetic_instance(0)
    cert = validate(ds, cl, synthetic_config())
    return cert, time.perf_counter() - start


def test_criterion_1_replica_tightness():
    start = time.perf_counter()
    ds, labels, _, _ = replica_instance()
    assert ds.n == 64
    cl = Clustering.from_assignment(ds, labels, 4)
    cert = validate(ds, cl, RunConfig(4, 4))
    elapsed = time.perf_counter() - start
    values = [r.value_lb for r in cert.per_anticluster]
    spread = max(values) - min(values)
    gap_pct = 100 * cert.gamma_lb
    ok = gap_pct <= 1e-4 and spread <= 1e-9 and elapsed <= 30
    report(1, ok, f"gamma_lb={gap_pct:.2e}% (<=1e-4%), subset values {values[0]:.6f} "
                  f"spread {spread:.1e} (<=1e-9), {elapsed:.1f}s (<=30s)")
    assert ok


def test_criterion_2_packed_partition_gap():
    start = time.perf_counter()
    ds, labels, _, _ = replica_instance()
    cl = Clustering.from_assignment(ds, labels, 4)
    packed = packed_partition(ds.points, labels, 4, 4)
    cert = certify_partition(ds, cl, packed, RunConfig(4, 4))
    elapsed = time.perf_counter() - start
    # every packed anticluster holds four coincident copies of four base
    # points, so its optimal 4-clustering costs 0 and the whole gap is 100%
    gap_pct = 100 * cert.gamma_lb
    ok = gap_pct >= 50 and elapsed <= 30
    report(2, ok, f"gamma_lb={gap_pct:.3f}% (>=50%, derived 100%), {elapsed:.2f}s (<=30s)")
    assert ok
    assert gap_pct == pytest.approx(100.0, abs=1e-9)


def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n, d = int(rng.integers(4, 13)), int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.2, 5.0)
        res = solve(pts, k)
        opt = brute_force(pts, k)[0]
        err = max(abs(res.value_lb - opt), abs(res.value_ub - opt))
        worst = max(worst, err / max(1.0, opt))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed <= 60
    report(3, ok, f"50 instances, worst relative error {worst:.1e} (<=1e-9), {elapsed:.1f}s (<=60s)")
    assert ok


def test_criterion_4_identity_suite():
    rng = np.random.default_rng(99)
    start = time.perf_counter()
    worst_huygens = worst_residual = 0.0
    for _ in range(1000):
        n, d = int(rng.integers(2, 80)), int(rng.integers(1, 6))
        k = int(rng.integers(1, min(n, 8) + 1))
        t = int(rng.integers(1, 6))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.01, 100.0) + rng.uniform(-50, 50, d)
        labels = rng.permutation(np.r_[np.arange(k), rng.integers(0, k, n - k)])
        cl = Clustering.from_assignment(pts, labels, k)
        parts = random_balanced_partition(n, t, rng)
        scale = max(cl.sse, 1e-300)
        worst_huygens = max(worst_huygens, abs(compute_sse(pts, labels, k)[0]
                                               - compute_sse_pairwise(pts, labels, k)) / scale)
        worst_residual = max(worst_residual, abs(decomposition_identity(pts, cl, parts)[2]) / scale)
    elapsed = time.perf_counter() - start
    ok = worst_huygens <= 1e-8 and worst_residual <= 1e-8 and elapsed <= 60
    report(4, ok, f"1000 triples, Huygens {worst_huygens:.1e}, decomposition residual "
                  f"{worst_residual:.1e} (<=1e-8 relative), {elapsed:.1f}s (<=60s)")
    assert ok


def test_criterion_5_synthetic_certification(synthetic_run):
    cert, elapsed = synthetic_run
    gap_pct = 100 * cert.gamma_lb
    ok = gap_pct <= 1.0 and elapsed <= 15 * 60
    report(5, ok, f"N=400 K=3 T=10: gamma_lb={gap_pct:.4f}% (<=1%), gamma+={100 * cert.gamma_plus:.4f}%, "
                  f"{elapsed:.1f}s (<=900s)")
    assert ok


def test_criterion_6_trace_and_stop(synthetic_run):
    cert, _ = synthetic_run
    trace = cert.trace
    increasing = all(b > a for a, b in zip(trace, trace[1:]))
    ok = increasing and cert.stop_reason in ("eps_gamma", "timeout", "no_improvement")
    report(6, ok, f"{len(trace)} accepted swaps, strictly increasing={increasing}, "
                  f"stop={cert.stop_reason}")
    assert ok


def test_criterion_7_beats_random_baseline():
    wins = 0
    for seed in range(20):
        ds, cl = synthetic_instance(seed)
        cfg = synthetic_config(seed)
        refined = validate(ds, cl, cfg)
        baseline = certify_partition(ds, cl, random_balanced_partition(ds.n, SYNTH_T,
                                                                        np.random.default_rng(seed)), cfg)
        wins += refined.gamma_lb < baseline.gamma_lb
    ok = wins >= 16
    report(7, ok, f"refined beats random baseline on {wins}/20 seeds (>=16)")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
