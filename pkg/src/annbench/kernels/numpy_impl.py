"""Pure-numpy distance and selection kernels.

Fallback used when the compiled extension is unavailable; also serves as an
independent implementation for cross-checking the compiled one.

Conventions shared by both backends:
  - dense inputs are float32, accumulation happens in float64;
  - angular distance is 1 - dot(a,b)/sqrt(|a|^2 * |b|^2), clamped at 0;
  - bit vectors arrive packed into uint64 words;
  - top_k orders by (distance, id) so exact ties go to the smaller id.
"""

import numpy as np

EUCLIDEAN = 0
ANGULAR = 1

BACKEND_NAME = "numpy"


def dense_dists(points, query, metric_code):
    """Distances from one float32 query to every row of a float32 matrix.

    Returns float64. Raises ValueError on a zero-norm vector under angular.
    """
    pts = points.astype(np.float64, copy=False)
    q = query.astype(np.float64, copy=False)
    if metric_code == EUCLIDEAN:
        diff = pts - q
        return np.sqrt(np.sum(diff * diff, axis=1))
    if metric_code == ANGULAR:
        # same reduction path as the row norms below, so that swapping the
        # roles of query and row reproduces the identical float64 value
        sq = float(np.sum(q[None, :] * q[None, :], axis=1)[0])
        if sq == 0.0:
            raise ValueError("zero-norm query vector under angular distance")
        sp = np.sum(pts * pts, axis=1)
        zero = np.flatnonzero(sp == 0.0)
        if zero.size:
            raise ValueError(
                f"zero-norm vector under angular distance (row {zero[0]})"
            )
        dot = np.sum(pts * q, axis=1)
        return np.maximum(1.0 - dot / np.sqrt(sp * sq), 0.0)
    raise ValueError(f"unknown metric code {metric_code}")


def hamming_dists(packed_points, packed_query):
    """Differing-bit counts between a packed uint64 query and packed rows."""
    return np.sum(
        np.bitwise_count(np.bitwise_xor(packed_points, packed_query)), axis=1
    ).astype(np.float64)


def top_k(dists, k):
    """Ids and values of the k smallest entries, ties to the smaller id.

    Stable sort on the distance array keeps equal values in index order,
    which is exactly the (distance, id) lexicographic rule.
    """
    order = np.argsort(dists, kind="stable")[:k].astype(np.int64)
    return order, dists[order]
