"""Deliberately misbehaving algorithms for exercising the harness.

These follow the same calling convention as the real baselines, so config
files can name them like any other constructor. They exist to prove the
runner's isolation story: timeouts fire, crashes are contained, memory
growth is measured.
"""

from __future__ import annotations

import os
import time

import numpy as np

from .core import ExactScanner
from .errors import UsageError


class Sleeper:
    """Sleeps on demand; queries return the first k train ids."""

    def __init__(self, metric, build_seconds=0.0, query_seconds=0.0):
        self.metric = metric
        self.build_seconds = float(build_seconds)
        self.query_seconds = float(query_seconds)
        self._n = 0

    def build(self, train):
        self._n = np.atleast_2d(train).shape[0]
        if self.build_seconds > 0:
            time.sleep(self.build_seconds)

    def set_query_params(self, *params):
        pass

    def query(self, q, k):
        if self.query_seconds > 0:
            time.sleep(self.query_seconds)
        return np.arange(min(k, self._n), dtype=np.int64)

    def stats(self):
        return {}


class Retainer:
    """Keeps a private memory block alive so the build's RSS delta is
    predictable; answers queries exactly."""

    def __init__(self, metric, megabytes=100):
        self.metric = metric
        self.megabytes = int(megabytes)
        self._blob = None
        self._scanner = None

    def build(self, train):
        # ones, not zeros: every page must really be touched
        self._blob = np.ones(self.megabytes << 20, dtype=np.uint8)
        self._scanner = ExactScanner(train, self.metric)

    def set_query_params(self, *params):
        pass

    def query(self, q, k):
        return self._scanner.knn(q, k).ids

    def stats(self):
        return {}


class Crasher:
    """Dies during the chosen phase; hard=True skips Python teardown."""

    def __init__(self, metric, phase="build", hard=False):
        if phase not in ("build", "query"):
            raise UsageError(f"unknown crash phase {phase!r}")
        self.metric = metric
        self.phase = phase
        self.hard = bool(hard)

    def _crash(self):
        if self.hard:
            os._exit(66)
        raise RuntimeError(f"injected {self.phase} crash")

    def build(self, train):
        if self.phase == "build":
            self._crash()

    def set_query_params(self, *params):
        pass

    def query(self, q, k):
        self._crash()

    def stats(self):
        return {}


class Scripted:
    """Deterministic per-query delays, consumed in call order.

    The schedule is a string so it can pass through a config file without
    being mistaken for an expansion axis: repetitions separated by ';',
    per-query seconds by ','. After the schedule runs out the delay is 0.
    Queries answer exactly, so recall stays 1.0 while times are scripted.
    """

    def __init__(self, metric, schedule=""):
        self.metric = metric
        if isinstance(schedule, str):
            reps = [r for r in schedule.split(";") if r.strip()]
            self.delays = [float(x) for r in reps for x in r.split(",")]
        else:
            self.delays = [float(x) for x in schedule]
        self._calls = 0
        self._scanner = None

    def build(self, train):
        self._scanner = ExactScanner(train, self.metric)

    def set_query_params(self, *params):
        pass

    def query(self, q, k):
        if self._calls < len(self.delays):
            time.sleep(self.delays[self._calls])
        self._calls += 1
        return self._scanner.knn(q, k).ids

    def stats(self):
        return {"scripted_calls": self._calls}
