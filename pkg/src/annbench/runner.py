"""The experiment loop: build an index in a worker child, time the queries,
recompute their distances, and persist one file per query group.

The parent process never runs algorithm code. It spawns one worker per run,
enforces the timeout by killing the whole worker, and afterwards writes
failure records for any group the worker did not finish. Everything the
worker does finish is kept, so a timeout halfway through a sweep costs only
the unfinished groups.
"""

from __future__ import annotations

import importlib
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import results
from .config import AlgorithmInstance, EXTERNAL, IN_PROCESS
from .core import ExactScanner
from .dataio import peek_dataset, read_dataset
from .errors import ConfigError, UsageError
from .results import (
    STATUS_FAILED,
    STATUS_OK,
    STATUS_TIMED_OUT,
    FailureRecord,
    RunRecord,
    failure_path,
    pad_results,
    result_path,
    write_failure,
    write_result,
)

DEFAULT_TIMEOUT = 7200.0
DEFAULT_RUN_COUNT = 3
_KILL_GRACE = 5.0


@dataclass
class RunSpec:
    dataset: str
    instance: AlgorithmInstance
    k: int
    mode: str = results.SINGLE
    timeout: float = DEFAULT_TIMEOUT
    run_count: int = DEFAULT_RUN_COUNT
    seed: int | None = None       # seeds the worker's global RNGs

    def validate(self) -> None:
        if self.mode not in results.MODES:
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.timeout <= 0:
            raise UsageError("timeout must be positive")
        if self.run_count < 1:
            raise UsageError("run_count must be at least 1")
        if self.k < 1:
            raise UsageError("k must be positive")


@dataclass
class GroupOutcome:
    query_params: list
    status: str          # ok | existing | timed-out | failed
    path: str


def resolve_entry_point(entry: str):
    module_name, sep, attr = entry.partition(":")
    if not sep or not attr:
        raise ConfigError(f"bad entry point {entry!r}; expected module:name")
    try:
        mod = importlib.import_module(module_name)
    except ImportError as e:
        raise ConfigError(f"cannot import module {module_name!r}: {e}") from e
    try:
        return getattr(mod, attr)
    except AttributeError:
        raise ConfigError(
            f"module {module_name!r} has no attribute {attr!r}") from None


def _extract_ids(result) -> np.ndarray:
    ids = getattr(result, "ids", result)
    return np.asarray(ids, dtype=np.int64).ravel()


def _rss_kb():
    try:
        import psutil
    except ImportError:
        return None
    try:
        return psutil.Process().memory_info().rss / 1024.0
    except Exception:
        return None


def _pin_to_one_core() -> str:
    try:
        allowed = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {allowed[0]})
        return f"cpu{allowed[0]}"
    except (AttributeError, OSError):
        return "unavailable"


@dataclass
class _WorkerPayload:
    spec: RunSpec
    dataset_path: str
    workdir: str
    group_indices: list[int] = field(default_factory=list)


def _instantiate(spec: RunSpec, metric, dimension):
    inst = spec.instance
    adef = inst.definition
    if adef.runner_kind == IN_PROCESS:
        cls = resolve_entry_point(adef.entry_point)
        return cls(*inst.constructor_args)
    from .wireproto import ExternalAlgorithm

    return ExternalAlgorithm(
        adef.entry_point, metric, dimension,
        constructor_args=inst.constructor_args,
        reply_timeout=spec.timeout)


def _time_group(alg, test, k: int, mode: str):
    """One repetition of one query group; returns (rows, times, batch_wall)."""
    m = test.shape[0]
    if mode == results.BATCH:
        started = time.perf_counter_ns()
        alg.batch_query(test, k)
        wall = (time.perf_counter_ns() - started) / 1e9
        rows = [_extract_ids(r) for r in alg.get_batch_results()]
        if len(rows) != m:
            raise UsageError(
                f"batch returned {len(rows)} rows for {m} queries")
        return rows, np.full(m, wall / m), wall

    prepare = getattr(alg, "prepare_query", None)
    rows = []
    times = np.empty(m, dtype=np.float64)
    for i in range(m):
        q = test[i]
        if prepare is not None:
            prepare(q)
            started = time.perf_counter_ns()
            res = alg.run_prepared(k)
        else:
            started = time.perf_counter_ns()
            res = alg.query(q, k)
        times[i] = (time.perf_counter_ns() - started) / 1e9
        rows.append(_extract_ids(res))
    return rows, times, None


def _worker_main(payload: _WorkerPayload) -> None:
    spec = payload.spec
    attrs = {}
    if spec.mode == results.SINGLE:
        attrs["pinned"] = _pin_to_one_core()
    if spec.seed is not None:
        # our own baselines carry explicit seeds in their constructor
        # args; this is for third-party classes that use the global RNGs
        import random

        random.seed(spec.seed)
        np.random.seed(spec.seed % 2**32)
        attrs["seed"] = str(spec.seed)
    from . import kernels

    attrs["kernels"] = kernels.BACKEND
    ds = read_dataset(payload.dataset_path)

    alg = _instantiate(spec, ds.metric, ds.train.shape[1])
    try:
        rss_before = _rss_kb()
        started = time.perf_counter()
        alg.build(ds.train)
        build_time = time.perf_counter() - started
        rss_after = _rss_kb()
        override = getattr(alg, "build_time_override", None)
        if override is not None:
            build_time = override
        index_size = None
        if rss_before is not None and rss_after is not None:
            index_size = max(rss_after - rss_before, 0.0)

        scanner = ExactScanner(ds.train, ds.metric)
        for gi in payload.group_indices:
            group = spec.instance.query_param_groups[gi]
            group_started = time.perf_counter()
            best = None
            for _ in range(spec.run_count):
                alg.set_query_params(*group)
                rows, times, batch_wall = _time_group(
                    alg, ds.test, spec.k, spec.mode)
                total = batch_wall if batch_wall is not None else times.sum()
                stats = alg.stats() if hasattr(alg, "stats") else {}
                if best is None or total < best[0]:
                    best = (total, rows, times, batch_wall, stats)
            _, rows, times, batch_wall, stats = best
            dist_rows = [
                (ids, scanner.subset_dists(ds.test[i], ids)
                 if len(ids) else np.empty(0))
                for i, ids in enumerate(rows)
            ]
            neighbors, distances = pad_results(dist_rows, spec.k)
            rec = RunRecord(
                dataset=spec.dataset, k=spec.k, mode=spec.mode,
                algorithm=spec.instance.algorithm,
                label=spec.instance.label, group=spec.instance.group,
                query_params=group, build_time=build_time,
                index_size=index_size, neighbors=neighbors, times=times,
                distances=distances, stats=stats,
                batch_wall_time=batch_wall,
                attrs={**attrs,
                       "group_wall": f"{time.perf_counter() - group_started:.6f}",
                       "run_count": str(spec.run_count)},
                status=STATUS_OK,
            )
            path = result_path(payload.workdir, spec.dataset, spec.k,
                               spec.mode, spec.instance.algorithm,
                               spec.instance.label, group)
            write_result(path, rec)
    finally:
        close = getattr(alg, "close", None)
        if close is not None:
            close()


def _precheck_batch(spec: RunSpec) -> None:
    adef = spec.instance.definition
    if adef.runner_kind == EXTERNAL:
        raise ConfigError(
            "batch mode is in-process only; external adapters are "
            "always per-query")
    cls = resolve_entry_point(adef.entry_point)
    if not (hasattr(cls, "batch_query") and hasattr(cls, "get_batch_results")):
        raise ConfigError(
            f"{spec.instance.algorithm} does not support batch queries")


def plan(spec: RunSpec, workdir):
    """Paths every group of this spec would land at."""
    return [
        result_path(workdir, spec.dataset, spec.k, spec.mode,
                    spec.instance.algorithm, spec.instance.label, group)
        for group in spec.instance.query_param_groups
    ]


def run(spec: RunSpec, dataset_path, workdir, force=False) -> list[GroupOutcome]:
    """Execute one RunSpec; returns one outcome per query group.

    Groups whose result file already exists are skipped unless force is
    set. The worker is killed at spec.timeout; finished groups survive.
    """
    spec.validate()
    header = peek_dataset(dataset_path)
    if spec.k > header.k_star:
        raise UsageError(
            f"k={spec.k} exceeds the dataset's ground-truth depth "
            f"{header.k_star}")
    if spec.mode == results.BATCH:
        _precheck_batch(spec)
    if spec.instance.definition.runner_kind == IN_PROCESS:
        resolve_entry_point(spec.instance.definition.entry_point)

    paths = plan(spec, workdir)
    pending = [i for i, p in enumerate(paths)
               if force or not p.exists()]
    outcomes = {
        i: GroupOutcome(spec.instance.query_param_groups[i], "existing",
                        str(paths[i]))
        for i in range(len(paths)) if i not in pending
    }
    if pending:
        for i in pending:
            if paths[i].exists():
                paths[i].unlink()     # force reruns start from a clean slate
        payload = _WorkerPayload(spec=spec, dataset_path=str(dataset_path),
                                 workdir=str(workdir),
                                 group_indices=pending)
        ctx = multiprocessing.get_context("spawn")
        worker = ctx.Process(target=_worker_main, args=(payload,))
        worker.start()
        worker.join(spec.timeout)
        timed_out = worker.is_alive()
        if timed_out:
            worker.terminate()
            worker.join(_KILL_GRACE)
            if worker.is_alive():
                worker.kill()
                worker.join()
        exitcode = worker.exitcode
        worker.close()

        fail_status = STATUS_TIMED_OUT if timed_out else STATUS_FAILED
        for i in pending:
            group = spec.instance.query_param_groups[i]
            fpath = failure_path(workdir, spec.dataset, spec.k, spec.mode,
                                 spec.instance.algorithm,
                                 spec.instance.label, group)
            if paths[i].exists():
                if fpath.exists():
                    fpath.unlink()
                outcomes[i] = GroupOutcome(group, STATUS_OK, str(paths[i]))
            else:
                error = (f"worker killed after {spec.timeout}s" if timed_out
                         else f"worker exited with status {exitcode}")
                write_failure(fpath, FailureRecord(
                    dataset=spec.dataset, k=spec.k, mode=spec.mode,
                    algorithm=spec.instance.algorithm,
                    label=spec.instance.label, group=spec.instance.group,
                    query_params=group, status=fail_status, error=error))
                outcomes[i] = GroupOutcome(group, fail_status, str(fpath))

    return [outcomes[i] for i in range(len(paths))]
