"""Quality and performance metrics over stored runs.

Every metric is a pure function of (ground-truth distances, run record), so
recomputing from files after deleting derived output changes nothing. The
registry maps metric names to descriptors; adding a metric means registering
one more descriptor here, no reruns needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UsageError
from .results import RunRecord

HIGHER = "higher-better"
LOWER = "lower-better"

# Relative slack on distance-threshold comparisons; absorbs recomputation
# noise between the ground-truth pass and the harness pass.
TAU = 1e-6


def _check_gt(gt, run: RunRecord) -> np.ndarray:
    if gt is None:
        raise UsageError("recall needs ground-truth distances")
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim != 2 or gt.shape[0] != run.query_count:
        raise UsageError(
            f"ground truth has {gt.shape[0] if gt.ndim == 2 else '?'} rows "
            f"for {run.query_count} queries")
    if run.k > gt.shape[1]:
        raise UsageError(
            f"run has k={run.k} but ground truth only goes {gt.shape[1]} deep")
    return gt


def _threshold_recall(gt, run: RunRecord, inflate: float) -> float:
    gt = _check_gt(gt, run)
    thresholds = gt[:, run.k - 1] * inflate
    thresholds = thresholds + TAU * thresholds
    within = run.distances <= thresholds[:, None]
    return float(within.sum(axis=1).mean() / run.k)


def recall(gt, run: RunRecord, params=None, warn=None) -> float:
    return _threshold_recall(gt, run, 1.0)


def recall_eps(gt, run: RunRecord, params=None, warn=None) -> float:
    eps = (params or {}).get("eps", 0.01)
    if eps <= 0:
        raise UsageError(f"eps must be positive, got {eps} (use recall)")
    return _threshold_recall(gt, run, 1.0 + eps)


def qps(gt, run: RunRecord, params=None, warn=None) -> float:
    if run.mode == "batch" and run.batch_wall_time is not None:
        total = run.batch_wall_time
    else:
        total = float(run.times.sum())
    if total == 0.0:
        if warn is not None:
            warn("total query time is zero; QPS reported as +inf")
        return float("inf")
    return run.query_count / total


def build_time(gt, run: RunRecord, params=None, warn=None) -> float:
    return float(run.build_time)


def index_size(gt, run: RunRecord, params=None, warn=None):
    return None if run.index_size is None else float(run.index_size)


def dist_comps(gt, run: RunRecord, params=None, warn=None):
    total = run.stats.get("candidates")
    if total is None:
        return None
    return float(total) / run.query_count


def index_size_per_qps(gt, run: RunRecord, params=None, warn=None):
    size = index_size(gt, run)
    if size is None:
        return None
    return size / qps(gt, run, warn=warn)


@dataclass(frozen=True)
class MetricDescriptor:
    name: str
    orientation: str
    compute: Callable
    description: str
    params: dict = field(default_factory=dict)

    def __call__(self, gt, run: RunRecord, warn=None):
        return self.compute(gt, run, self.params, warn)


REGISTRY: dict[str, MetricDescriptor] = {}


def _register(d: MetricDescriptor) -> None:
    REGISTRY[d.name] = d


_register(MetricDescriptor(
    "recall", HIGHER, recall,
    "fraction of returned points within the k-th true neighbor distance"))
for _eps in (0.01, 0.1):
    _register(MetricDescriptor(
        f"recall-eps-{_eps}", HIGHER, recall_eps,
        f"recall with the distance threshold inflated by {1 + _eps}",
        params={"eps": _eps}))
_register(MetricDescriptor(
    "qps", HIGHER, qps, "queries answered per second of wall time"))
_register(MetricDescriptor(
    "build-time", LOWER, build_time, "seconds spent building the index"))
_register(MetricDescriptor(
    "index-size", LOWER, index_size, "resident-set growth of the build, kB"))
_register(MetricDescriptor(
    "dist-comps", LOWER, dist_comps,
    "mean candidates (distance computations) per query, when reported"))
_register(MetricDescriptor(
    "index-size-per-qps", LOWER, index_size_per_qps,
    "index size scaled by query throughput, kB*s"))


def get_metric(name: str) -> MetricDescriptor:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise UsageError(f"unknown metric {name!r} (known: {known})") from None


def compute_metric(name: str, gt, run: RunRecord, warn=None):
    return get_metric(name)(gt, run, warn=warn)
