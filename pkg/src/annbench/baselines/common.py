"""Shared plumbing for the in-process baselines."""

from __future__ import annotations

import warnings

import numpy as np

from ..core import ExactScanner, ResultTuple, as_metric


class CandidateCounter:
    """Counts exact distance computations, reset per query group."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.candidates = 0
        self.warnings = []

    def warn_once(self, message: str):
        if message not in self.warnings:
            self.warnings.append(message)
            warnings.warn(message, stacklevel=3)


class BaselineANN:
    """Common state: metric, exact scanner over the train set, counters."""

    def __init__(self, metric):
        self.metric = as_metric(metric)
        self._scanner = None
        self._counter = CandidateCounter()

    @property
    def n(self) -> int:
        return len(self._scanner)

    def build(self, train) -> None:
        raise NotImplementedError

    def _attach(self, train) -> None:
        self._scanner = ExactScanner(train, self.metric)

    def set_query_params(self) -> None:
        self._counter.reset()

    def query(self, q, k: int) -> ResultTuple:
        raise NotImplementedError

    def stats(self) -> dict:
        out = {"candidates": self._counter.candidates}
        if self._counter.warnings:
            out["warnings"] = list(self._counter.warnings)
        return out

    def _rerank(self, q, candidate_ids, k: int) -> ResultTuple:
        cand = np.asarray(list(candidate_ids)
                          if not isinstance(candidate_ids, np.ndarray)
                          else candidate_ids, dtype=np.int64)
        self._counter.candidates += len(cand)
        row = self._scanner.rerank(q, cand, k)
        return ResultTuple(ids=row.ids, distances=row.distances,
                           k_requested=k)

    def _clamped(self, value: int, k: int, name: str) -> int:
        if value < k:
            self._counter.warn_once(
                f"{name}={value} is below k={k}; clamped up to {k}")
            return k
        return int(value)
