"""End-to-end validation of a clustering and the certificate it produces."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import exact
from .anticluster import (
    EPS_GAMMA,
    NO_IMPROVEMENT,
    TIMEOUT,
    evaluate_lb_plus,
    initialize,
    swap_refine,
)
from .core import Clustering, as_points, compute_sse
from .exact import SubproblemResult
from .kmeans import KMeansConfig

log = logging.getLogger(__name__)

LARGE_SUBSET = 60
STOP_LABELS = {EPS_GAMMA: "ε_γ", TIMEOUT: "T/O", NO_IMPROVEMENT: "h", None: "-"}


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    k: int
    t: int
    restarts_kmeans: int = 1000
    restarts_anticluster: int = 15
    eps_gamma: float = 1e-5  # fraction, i.e. 0.001 %
    swap_time_limit: float | None = None  # seconds; None means 4 * t minutes
    certify_budget: float = 60.0
    assembly_time_limit: float = 60.0
    max_iters: int = 100
    threads: int | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("k", "t", "restarts_kmeans", "restarts_anticluster", "max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.eps_gamma < 0:
            raise ValueError("eps_gamma must be >= 0")
        if self.certify_budget <= 0:
            raise ValueError("certify_budget must be positive")

    @property
    def swap_seconds(self) -> float:
        return 240.0 * self.t if self.swap_time_limit is None else self.swap_time_limit

    def kmeans(self) -> KMeansConfig:
        return KMeansConfig(self.k, max_iters=self.max_iters, restarts=self.restarts_kmeans,
                            seed=self.seed)


@dataclass
class Certificate:
    ub: float
    lb_plus: float
    per_anticluster: list[SubproblemResult]
    stop_reason: str | None = None
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    partition: list | None = None

    @property
    def lb(self) -> float:
        return math.fsum(r.value_lb for r in self.per_anticluster)

    @property
    def gamma_plus(self) -> float:
        return (self.ub - self.lb_plus) / self.ub if self.ub > 0 else 0.0

    @property
    def gamma_lb(self) -> float:
        return (self.ub - self.lb) / self.ub if self.ub > 0 else 0.0

    @property
    def degraded(self) -> bool:
        return any(r.status == exact.FAILED for r in self.per_anticluster)

    @property
    def total_min(self) -> float:
        return sum(self.timings.get(key, 0.0) for key in ("init_s", "heur_s", "certify_s")) / 60.0


def random_balanced_partition(n: int, t: int, rng: np.random.Generator) -> np.ndarray:
    """Random equal-size partition of all points, ignoring the clustering."""
    labels = np.empty(n, dtype=np.int64)
    labels[rng.permutation(n)] = np.arange(n) % t
    return labels


def _certify_one(points, idx, k, budget, seed, hint):
    try:
        return exact.solve(points[idx], k, time_budget=budget, initial_labels=hint, seed=seed)
    except Exception:  # noqa: BLE001 - a failed subset degrades to the trivial bound
        log.exception("certification of a subset failed")
        return None


def certify_subsets(ds, clustering: Clustering, subsets, config: RunConfig, hints=None):
    """Lower-bound every subset concurrently. Failed subsets get bound 0."""
    points = as_points(ds)
    hints = hints if hints is not None else [None] * len(subsets)
    for s, idx in enumerate(subsets):
        if len(idx) > LARGE_SUBSET:
            log.warning("anticluster %d has %d points; exact certification may not finish "
                        "within the budget", s, len(idx))
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(_certify_one, points, idx, config.k, config.certify_budget,
                               config.seed, hint)
                   for idx, hint in zip(subsets, hints)]
        results = [f.result() for f in futures]
    out = []
    for idx, res in zip(subsets, results):
        if res is None:
            local = clustering.assignment[idx]
            _, local = np.unique(local, return_inverse=True)
            ub = compute_sse(points[idx], local, int(local.max()) + 1)[0]
            res = SubproblemResult(0.0, ub, exact.FAILED)
        out.append(res)
    return out


def certify_partition(ds, clustering: Clustering, assignment, config: RunConfig) -> Certificate:
    """Certify a fixed partition, without any refinement."""
    points = as_points(ds)
    labels = np.asarray(assignment, dtype=np.int64)
    start = time.perf_counter()
    part = evaluate_lb_plus(points, labels, clustering, config.kmeans(), config.t)
    mid = time.perf_counter()
    results = certify_subsets(points, clustering, part.subsets, config,
                              [f.labels for f in part.fits])
    end = time.perf_counter()
    return Certificate(
        ub=clustering.sse, lb_plus=part.lb_plus, per_anticluster=results, stop_reason=None,
        timings={"init_s": mid - start, "heur_s": 0.0, "certify_s": end - mid},
        config=asdict(config), partition=labels.tolist(),
    )


def validate(ds, clustering: Clustering, config: RunConfig) -> Certificate:
    """Initialise, refine and certify an anticlustering partition for ``clustering``."""
    points = as_points(ds)
    if clustering.k != config.k:
        raise ValueError(f"clustering has k={clustering.k}, config has k={config.k}")
    rng = np.random.default_rng(config.seed)
    kcfg = config.kmeans()

    t0 = time.perf_counter()
    part = initialize(points, clustering, config.t, config.restarts_anticluster, rng, kcfg,
                      config.assembly_time_limit)
    t1 = time.perf_counter()
    log.info("initial LB+ %.6f (gamma+ %.5f%%)", part.lb_plus, 100 * part.gamma_plus(clustering.sse))
    part, trace, stop = swap_refine(points, part, clustering, config.eps_gamma,
                                    config.swap_seconds, kcfg)
    t2 = time.perf_counter()
    log.info("refined LB+ %.6f after %d swaps, stop: %s", part.lb_plus, len(trace), stop)
    results = certify_subsets(points, clustering, part.subsets, config,
                              [f.labels for f in part.fits])
    t3 = time.perf_counter()
    return Certificate(
        ub=clustering.sse, lb_plus=part.lb_plus, per_anticluster=results, stop_reason=stop,
        timings={"init_s": t1 - t0, "heur_s": t2 - t1, "certify_s": t3 - t2},
        config=asdict(config), trace=list(trace), partition=part.assignment.tolist(),
    )


def to_dict(cert: Certificate) -> dict:
    if not cert.per_anticluster:
        raise ReportError("a certificate needs at least one anticluster result")
    return {
        "ub": cert.ub,
        "lb_plus": cert.lb_plus,
        "lb": cert.lb,
        "gamma_plus_pct": 100.0 * cert.gamma_plus,
        "gamma_lb_pct": 100.0 * cert.gamma_lb,
        "stop_reason": cert.stop_reason,
        "degraded": cert.degraded,
        "per_anticluster": [
            {"t": s, "value_lb": r.value_lb, "value_ub": r.value_ub, "status": r.status,
             "time_s": r.time_spent, "nodes": r.nodes_explored}
            for s, r in enumerate(cert.per_anticluster)
        ],
        "timings": {**cert.timings, "total_min": cert.total_min},
        "config": cert.config,
        "lb_plus_trace": cert.trace,
        "partition": cert.partition,
    }


def from_dict(data: dict) -> Certificate:
    results = [
        SubproblemResult(r["value_lb"], r["value_ub"], r["status"], r.get("nodes", 0), r["time_s"])
        for r in sorted(data["per_anticluster"], key=lambda r: r["t"])
    ]
    timings = {k: v for k, v in data["timings"].items() if k != "total_min"}
    return Certificate(
        ub=data["ub"], lb_plus=data["lb_plus"], per_anticluster=results,
        stop_reason=data.get("stop_reason"), timings=timings, config=data.get("config", {}),
        trace=data.get("lb_plus_trace", []), partition=data.get("partition"),
    )


def emit_report(cert: Certificate, format: str = "json") -> str:
    if format == "json":
        return json.dumps(to_dict(cert), indent=2)
    if format == "text":
        return _text_report(cert)
    raise ReportError(f"unknown report format {format!r}")


def parse_report(text: str) -> Certificate:
    return from_dict(json.loads(text))


def _text_report(cert: Certificate) -> str:
    if not cert.per_anticluster:
        raise ReportError("a certificate needs at least one anticluster result")
    header = f"{'T':>4} {'γ_LB(%)':>9} {'γ+(%)':>9} {'Init(s)':>8} {'Heur(s)':>8} " \
             f"{'Cert(s)':>8} {'Time(min)':>9} {'Stop':>5}"
    row = (f"{len(cert.per_anticluster):>4} {100 * cert.gamma_lb:>9.3f} {100 * cert.gamma_plus:>9.3f} "
           f"{cert.timings.get('init_s', 0.0):>8.0f} {cert.timings.get('heur_s', 0.0):>8.0f} "
           f"{cert.timings.get('certify_s', 0.0):>8.0f} {cert.total_min:>9.1f} "
           f"{STOP_LABELS.get(cert.stop_reason, cert.stop_reason):>5}")
    lines = [header, row, "",
             f"UB {cert.ub:.6f}   LB+ {cert.lb_plus:.6f}   LB {cert.lb:.6f}"]
    for s, r in enumerate(cert.per_anticluster):
        lines.append(f"  S_{s}: lb {r.value_lb:.6f}  ub {r.value_ub:.6f}  {r.status}  "
                     f"{r.time_spent:.2f}s  {r.nodes_explored} nodes")
    if cert.degraded:
        lines.append("DEGRADED: at least one subset failed and contributes a zero bound")
    return "\n".join(lines)
