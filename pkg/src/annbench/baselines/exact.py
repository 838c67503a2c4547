"""The exact baseline: every query is a full scan."""

from __future__ import annotations

import numpy as np

from ..core import ResultTuple
from .common import BaselineANN


class BruteForce(BaselineANN):
    """Full linear scan; the recall-1.0 reference everything else is judged
    against. Supports batch delivery of the whole query set."""

    def __init__(self, metric):
        super().__init__(metric)
        self._batch = None

    def build(self, train) -> None:
        self._attach(train)

    def query(self, q, k: int) -> ResultTuple:
        self._counter.candidates += self.n
        row = self._scanner.knn(q, k)
        return ResultTuple(ids=row.ids, distances=row.distances,
                           k_requested=k)

    def batch_query(self, queries, k: int) -> None:
        self._batch = [self.query(np.asarray(q), k) for q in queries]

    def get_batch_results(self) -> list[ResultTuple]:
        return self._batch
