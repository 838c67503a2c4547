"""Random-projection tree forest.

Each tree splits the train set recursively with a hyperplane: through the
midpoint of two sampled points for euclidean data, through the origin with
a random normal for angular data. Querying walks all trees at once behind
one priority queue keyed on plane margins, collecting leaf candidates until
enough distinct points are seen, then reranks them exactly.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..core import Metric, ResultTuple, as_dense
from ..errors import UsageError
from .common import BaselineANN

_SPLIT_RETRIES = 3


class _Tree:
    """Flat node storage; node 0 is the root.

    normals[i] is None for leaves (ids[i] set) and for degenerate splits
    that fell back to positional halving (margin treated as 0).
    """

    __slots__ = ("normals", "offsets", "left", "right", "ids", "kind")

    def __init__(self):
        self.normals = []
        self.offsets = []
        self.left = []
        self.right = []
        self.ids = []
        self.kind = []      # "split" | "halved" | "leaf"

    def add_node(self):
        self.normals.append(None)
        self.offsets.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.ids.append(None)
        self.kind.append("leaf")
        return len(self.kind) - 1


class RPForest(BaselineANN):
    def __init__(self, metric, n_trees, leaf_size=32, seed=0):
        super().__init__(metric)
        if self.metric is Metric.HAMMING:
            raise UsageError("rpforest indexes dense points only")
        if n_trees < 1 or leaf_size < 1:
            raise UsageError("n_trees and leaf_size must be at least 1")
        self.n_trees = int(n_trees)
        self.leaf_size = int(leaf_size)
        self.seed = int(seed)
        self._trees = []
        self._search_candidates = None
        self._batch = None

    def build(self, train) -> None:
        self._attach(train)
        pts = as_dense(np.atleast_2d(train)).astype(np.float64)
        rng = np.random.default_rng(self.seed)
        self._trees = [self._grow(pts, rng) for _ in range(self.n_trees)]

    def _pick_plane(self, pts, ids, rng):
        """One split attempt; returns (normal, offset) or None."""
        if self.metric is Metric.ANGULAR:
            normal = rng.normal(size=pts.shape[1])
            return normal, 0.0
        ia, ib = rng.choice(len(ids), size=2, replace=False)
        a, b = pts[ids[ia]], pts[ids[ib]]
        normal = b - a
        if not np.any(normal):
            return None
        return normal, float(normal @ ((a + b) / 2.0))

    def _grow(self, pts, rng) -> _Tree:
        tree = _Tree()
        root = tree.add_node()
        stack = [(root, np.arange(pts.shape[0], dtype=np.int64))]
        while stack:
            node, ids = stack.pop()
            if len(ids) <= self.leaf_size:
                tree.ids[node] = ids
                continue
            split = None
            for _ in range(_SPLIT_RETRIES):
                plane = self._pick_plane(pts, ids, rng)
                if plane is None:
                    continue
                normal, offset = plane
                side = pts[ids] @ normal > offset
                n_right = int(side.sum())
                if 0 < n_right < len(ids):
                    split = (normal, offset, side)
                    break
            if split is None:
                # degenerate cloud (duplicates or all on one side): halve
                # by position, margin 0 routes queries into both halves
                half = len(ids) // 2
                tree.kind[node] = "halved"
                left_ids, right_ids = ids[:half], ids[half:]
            else:
                normal, offset, side = split
                tree.kind[node] = "split"
                tree.normals[node] = normal
                tree.offsets[node] = offset
                left_ids, right_ids = ids[~side], ids[side]
            tree.left[node] = l = tree.add_node()
            tree.right[node] = r = tree.add_node()
            stack.append((l, left_ids))
            stack.append((r, right_ids))
        return tree

    def set_query_params(self, search_candidates) -> None:
        super().set_query_params()
        if search_candidates < 1:
            raise UsageError("search_candidates must be at least 1")
        self._search_candidates = int(search_candidates)

    def query(self, q, k: int) -> ResultTuple:
        if self._search_candidates is None:
            raise UsageError("set_query_params was never called")
        want = self._clamped(self._search_candidates, k, "search_candidates")
        qv = as_dense(q).ravel().astype(np.float64)

        heap = []
        seq = 0
        for t in range(self.n_trees):
            heap.append((-math.inf, seq, t, 0))
            seq += 1
        candidates = set()
        while heap and len(candidates) < want:
            neg_priority, _, t, node = heapq.heappop(heap)
            priority = -neg_priority
            tree = self._trees[t]
            if tree.kind[node] == "leaf":
                candidates.update(tree.ids[node].tolist())
                continue
            if tree.kind[node] == "halved":
                margin = 0.0
            else:
                margin = float(qv @ tree.normals[node]) - tree.offsets[node]
            heapq.heappush(
                heap, (-min(priority, margin), seq, t, tree.right[node]))
            seq += 1
            heapq.heappush(
                heap, (-min(priority, -margin), seq, t, tree.left[node]))
            seq += 1
        return self._rerank(q, sorted(candidates), k)

    def batch_query(self, queries, k: int) -> None:
        self._batch = [self.query(np.asarray(q), k) for q in queries]

    def get_batch_results(self) -> list[ResultTuple]:
        return self._batch
