"""Exact k-NN graph with greedy best-first search.

The graph is built by brute force (fine at desk scale, and build time is
itself a reported metric). The stored adjacency is each node's g nearest
neighbors; traversal treats those edges as undirected, since one-way
nearest-neighbor links leave no way to step *into* a point that nothing
else counts among its own neighbors. Queries run a beam search from a few
random entry points; the search stops once the closest unexpanded node is
worse than the whole current beam.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..core import ResultTuple
from ..errors import UsageError
from .common import BaselineANN


class KnnGraph(BaselineANN):
    def __init__(self, metric, degree, entry_points=4, seed=0):
        super().__init__(metric)
        if degree < 1:
            raise UsageError("degree must be at least 1")
        if entry_points < 1:
            raise UsageError("entry_points must be at least 1")
        self.degree = int(degree)
        self.entry_points = int(entry_points)
        self.seed = int(seed)
        self._adjacency = None
        self._links = None
        self._entries = None
        self._beam_width = None

    def build(self, train) -> None:
        self._attach(train)
        n = self.n
        g = min(self.degree, n - 1)
        if g < 1:
            raise UsageError("train set too small for a graph")
        adjacency = np.empty((n, g), dtype=np.int64)
        pts = np.atleast_2d(train)
        for i in range(n):
            row = self._scanner.knn(pts[i], g + 1)
            ids = row.ids[row.ids != i][:g]
            if len(ids) < g:
                # duplicates of i crowd out the self id; top up arbitrarily
                pool = np.setdiff1d(row.ids, np.concatenate(([i], ids)))
                ids = np.concatenate((ids, pool))[:g]
            adjacency[i] = ids
        self._adjacency = adjacency
        linked = [set(row) for row in adjacency.tolist()]
        for i, row in enumerate(adjacency.tolist()):
            for j in row:
                linked[j].add(i)
        self._links = [np.fromiter(sorted(s), np.int64, len(s))
                       for s in linked]
        rng = np.random.default_rng(self.seed)
        self._entries = rng.choice(n, size=min(self.entry_points, n),
                                   replace=False)

    def set_query_params(self, beam_width) -> None:
        super().set_query_params()
        if beam_width < 1:
            raise UsageError("beam_width must be at least 1")
        self._beam_width = int(beam_width)

    def query(self, q, k: int) -> ResultTuple:
        if self._beam_width is None:
            raise UsageError("set_query_params was never called")
        bw = self._clamped(self._beam_width, k, "beam_width")

        visited = {}
        entry_d = self._scanner.subset_dists(q, self._entries)
        frontier = []
        for i, d in zip(self._entries.tolist(), entry_d.tolist()):
            if i not in visited:
                visited[i] = d
                heapq.heappush(frontier, (d, i))
        beam = [(-d, i) for d, i in frontier[:]]
        heapq.heapify(beam)
        while len(beam) > bw:
            heapq.heappop(beam)

        while frontier:
            d, u = heapq.heappop(frontier)
            if len(beam) >= bw and d > -beam[0][0]:
                break
            fresh = np.array([v for v in self._links[u].tolist()
                              if v not in visited], dtype=np.int64)
            if not len(fresh):
                continue
            dists = self._scanner.subset_dists(q, fresh)
            for v, dv in zip(fresh.tolist(), dists.tolist()):
                visited[v] = dv
                heapq.heappush(frontier, (dv, v))
                heapq.heappush(beam, (-dv, v))
                if len(beam) > bw:
                    heapq.heappop(beam)

        self._counter.candidates += len(visited)
        best = sorted(visited.items(), key=lambda iv: (iv[1], iv[0]))[:k]
        ids = np.array([i for i, _ in best], dtype=np.int64)
        dd = np.array([d for _, d in best], dtype=np.float64)
        return ResultTuple(ids=ids, distances=dd, k_requested=k)
