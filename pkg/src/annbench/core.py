"""Shared domain types and exact distance computations.

Dense points are float32 vectors; bit points are 0/1 vectors packed into
uint64 words before any distance work. All distances are returned as
float64, accumulated in float64.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import UsageError


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    ANGULAR = "angular"
    HAMMING = "hamming"


class PointKind(str, Enum):
    DENSE = "float"
    BIT = "bit"


def point_kind_for(metric: Metric) -> PointKind:
    return PointKind.BIT if metric is Metric.HAMMING else PointKind.DENSE


def as_metric(value) -> Metric:
    if isinstance(value, Metric):
        return value
    try:
        return Metric(str(value))
    except ValueError:
        raise UsageError(
            f"unknown metric {value!r}; expected one of "
            f"{[m.value for m in Metric]}"
        ) from None


def as_dense(points) -> np.ndarray:
    """Contiguous float32 view/copy of dense point data."""
    arr = np.ascontiguousarray(points, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise UsageError("dense points must be finite (no NaN/Inf)")
    return arr


def as_bits(points) -> np.ndarray:
    """Contiguous uint8 0/1 view/copy of bit point data."""
    arr = np.ascontiguousarray(points, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise UsageError("bit points must contain only 0/1 values")
    return arr


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack 0/1 rows of shape (n, d) into uint64 words of shape (n, w)."""
    bits = as_bits(np.atleast_2d(bits))
    packed8 = np.packbits(bits, axis=1)
    pad = (-packed8.shape[1]) % 8
    if pad:
        packed8 = np.pad(packed8, ((0, 0), (0, pad)))
    return np.ascontiguousarray(packed8).view(np.uint64)


@dataclass
class GroundTruthRow:
    """Exact k*-NN of one query: parallel id/distance arrays."""

    ids: np.ndarray
    distances: np.ndarray

    def validate(self, n_train: int) -> None:
        if len(self.ids) != len(self.distances):
            raise UsageError("ids and distances must have equal length")
        if np.any(np.diff(self.distances) < 0):
            raise UsageError("distances must be non-decreasing")
        if len(np.unique(self.ids)) != len(self.ids):
            raise UsageError("ids must be distinct")
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() >= n_train):
            raise UsageError("ids must index into the train set")


@dataclass
class ResultTuple:
    """What an algorithm returned for one query, distances recomputed."""

    ids: np.ndarray
    distances: np.ndarray
    k_requested: int

    def validate(self, n_train: int) -> None:
        if len(self.ids) > self.k_requested:
            raise UsageError("result longer than requested k")
        GroundTruthRow(self.ids, self.distances).validate(n_train)


@dataclass
class CandidateStats:
    """Per-query extra info an algorithm may report."""

    n_candidates: int | None = None

    def validate(self, result_count: int) -> None:
        if self.n_candidates is not None and self.n_candidates < result_count:
            raise UsageError(
                "candidate count smaller than the number of returned points"
            )


class ExactScanner:
    """Train set prepared once for repeated exact scans.

    Packs bit data / makes dense data contiguous so per-query work is a
    single kernel call.
    """

    def __init__(self, train, metric):
        self.metric = as_metric(metric)
        if self.metric is Metric.HAMMING:
            bits = as_bits(np.atleast_2d(train))
            self.dimension = bits.shape[1]
            self._pts = pack_bits(bits)
        else:
            self._pts = as_dense(np.atleast_2d(train))
            self.dimension = self._pts.shape[1]

    def __len__(self):
        return self._pts.shape[0]

    def _prep_query(self, query):
        if self.metric is Metric.HAMMING:
            q = as_bits(query).ravel()
            if q.shape[0] != self.dimension:
                raise UsageError(
                    f"dimension mismatch: query has {q.shape[0]} bits, "
                    f"train has {self.dimension}"
                )
            return pack_bits(q)[0]
        q = as_dense(query).ravel()
        if q.shape[0] != self.dimension:
            raise UsageError(
                f"dimension mismatch: query has {q.shape[0]} dims, "
                f"train has {self.dimension}"
            )
        return q

    def dists(self, query) -> np.ndarray:
        """Distances from the query to every train point."""
        q = self._prep_query(query)
        if self.metric is Metric.HAMMING:
            return kernels.hamming_dists(self._pts, q)
        code = (
            kernels.EUCLIDEAN
            if self.metric is Metric.EUCLIDEAN
            else kernels.ANGULAR
        )
        try:
            return kernels.dense_dists(self._pts, q, code)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def knn(self, query, k: int) -> GroundTruthRow:
        if k > len(self):
            raise UsageError(f"k={k} exceeds train size {len(self)}")
        if k <= 0:
            raise UsageError("k must be positive")
        ids, dvals = kernels.top_k(self.dists(query), k)
        return GroundTruthRow(ids=ids, distances=dvals)

    def subset_dists(self, query, ids) -> np.ndarray:
        """Distances from the query to the given train rows, in order."""
        q = self._prep_query(query)
        sub = self._pts[np.asarray(ids, dtype=np.int64)]
        if self.metric is Metric.HAMMING:
            return kernels.hamming_dists(sub, q)
        code = (
            kernels.EUCLIDEAN
            if self.metric is Metric.EUCLIDEAN
            else kernels.ANGULAR
        )
        return kernels.dense_dists(sub, q, code)

    def rerank(self, query, candidate_ids, k: int) -> GroundTruthRow:
        """Exact top-k among a candidate id set (ties to the smaller id)."""
        cand = np.unique(np.asarray(candidate_ids, dtype=np.int64))
        d = self.subset_dists(query, cand)
        sel, dvals = kernels.top_k(d, min(k, len(cand)))
        return GroundTruthRow(ids=cand[sel], distances=dvals)


def distance(a, b, metric) -> float:
    """Exact distance between two points; symmetric, zero on identity."""
    metric = as_metric(metric)
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape[0] != b.shape[0]:
        raise UsageError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}"
        )
    return float(ExactScanner(a[None, :], metric).dists(b)[0])


def brute_force_knn(query, train, k: int, metric) -> GroundTruthRow:
    """Exact k nearest neighbors by full scan; ties to the smaller id."""
    return ExactScanner(train, metric).knn(query, k)
