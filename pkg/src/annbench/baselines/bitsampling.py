"""Bit-sampling LSH for hamming data.

Each of L tables hashes a code to b sampled bit positions; a query pulls
the buckets its own hash lands in. With probes > 1 the lookup also flips
key bits (singles first, then pairs, in position order) before giving up,
the multi-probe trick. Candidates are reranked exactly.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from ..core import Metric, ResultTuple, as_bits
from ..errors import ConfigError, UsageError
from .common import BaselineANN


class BitSampling(BaselineANN):
    def __init__(self, metric, n_tables, bits_per_key, seed=0):
        super().__init__(metric)
        if self.metric is not Metric.HAMMING:
            raise ConfigError(
                f"bitsampling needs a bit dataset, not {self.metric.value}")
        if n_tables < 1:
            raise UsageError("n_tables must be at least 1")
        if bits_per_key < 0:
            raise UsageError("bits_per_key cannot be negative")
        self.n_tables = int(n_tables)
        self.bits_per_key = int(bits_per_key)
        self.seed = int(seed)
        self._tables = None
        self._positions = None
        self._probes = None

    def build(self, train) -> None:
        bits = as_bits(np.atleast_2d(train))
        self._attach(bits)
        d = bits.shape[1]
        if self.bits_per_key > d:
            raise UsageError(
                f"bits_per_key={self.bits_per_key} exceeds code length {d}")
        rng = np.random.default_rng(self.seed)
        self._positions = [
            np.sort(rng.choice(d, size=self.bits_per_key, replace=False))
            for _ in range(self.n_tables)
        ]
        self._tables = []
        for pos in self._positions:
            table = {}
            keys = bits[:, pos]
            for i in range(bits.shape[0]):
                table.setdefault(keys[i].tobytes(), []).append(i)
            self._tables.append(
                {key: np.array(ids, np.int64) for key, ids in table.items()})

    def set_query_params(self, probes) -> None:
        super().set_query_params()
        if probes < 1:
            raise UsageError("probes must be at least 1")
        self._probes = int(probes)

    def _probe_keys(self, key_bits: np.ndarray):
        """Key variants in lookup order: exact, single flips, pair flips."""
        yield key_bits.tobytes()
        b = len(key_bits)
        for i in range(b):
            flipped = key_bits.copy()
            flipped[i] ^= 1
            yield flipped.tobytes()
        for i, j in combinations(range(b), 2):
            flipped = key_bits.copy()
            flipped[i] ^= 1
            flipped[j] ^= 1
            yield flipped.tobytes()

    def query(self, q, k: int) -> ResultTuple:
        if self._probes is None:
            raise UsageError("set_query_params was never called")
        q = as_bits(q).ravel()
        candidates = set()
        for pos, table in zip(self._positions, self._tables):
            key_bits = q[pos]
            for count, key in enumerate(self._probe_keys(key_bits)):
                if count >= self._probes:
                    break
                hit = table.get(key)
                if hit is not None:
                    candidates.update(hit.tolist())
        if not candidates:
            return ResultTuple(ids=np.empty(0, np.int64),
                               distances=np.empty(0, np.float64),
                               k_requested=k)
        return self._rerank(q, sorted(candidates), k)
