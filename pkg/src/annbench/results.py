"""Result files and their directory layout.

One completed run of (algorithm instance, query-parameter group) becomes one
HDF5 file under ``results/<dataset>/<k>/<mode>/<algorithm>/<hash>.res``.
Runs that time out or crash leave a small JSON failure record instead, so a
results tree always says what happened without ever holding half-written
files: everything lands via write-then-rename.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np

from .errors import FormatError

SINGLE = "single-query"
BATCH = "batch"
MODES = (SINGLE, BATCH)

STATUS_OK = "ok"
STATUS_TIMED_OUT = "timed-out"
STATUS_FAILED = "failed"

RESULT_SUFFIX = ".res"
FAILURE_SUFFIX = ".failed.json"

_ID_PAD = -1
_DIST_PAD = np.inf


@dataclass
class RunRecord:
    """One query group's stored outcome."""

    dataset: str
    k: int
    mode: str
    algorithm: str
    label: str
    group: str
    query_params: list
    build_time: float
    index_size: float | None     # kB; None when the platform counter failed
    neighbors: np.ndarray        # m×k ids, -1 where fewer were returned
    times: np.ndarray            # m per-query seconds
    distances: np.ndarray        # m×k recomputed, +inf where padded
    stats: dict = field(default_factory=dict)
    batch_wall_time: float | None = None
    attrs: dict = field(default_factory=dict)
    status: str = STATUS_OK

    @property
    def query_count(self) -> int:
        return int(self.neighbors.shape[0])


@dataclass
class FailureRecord:
    dataset: str
    k: int
    mode: str
    algorithm: str
    label: str
    group: str
    query_params: list
    status: str                  # timed-out | failed
    error: str = ""


def group_hash(label: str, query_params: list) -> str:
    key = json.dumps([label, query_params], sort_keys=True)
    return hashlib.sha1(key.encode()).hexdigest()[:16]


def run_dir(root, dataset: str, k: int, mode: str, algorithm: str) -> Path:
    return Path(root) / "results" / dataset / str(k) / mode / algorithm


def result_path(root, dataset, k, mode, algorithm, label, query_params) -> Path:
    stem = group_hash(label, query_params)
    return run_dir(root, dataset, k, mode, algorithm) / (stem + RESULT_SUFFIX)


def failure_path(root, dataset, k, mode, algorithm, label, query_params) -> Path:
    stem = group_hash(label, query_params)
    return run_dir(root, dataset, k, mode, algorithm) / (stem + FAILURE_SUFFIX)


def _atomic_replace(path: Path, write_fn) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def pad_results(rows: list[tuple[np.ndarray, np.ndarray]], k: int):
    """Stack variable-length (ids, dists) rows into padded m×k arrays."""
    m = len(rows)
    neighbors = np.full((m, k), _ID_PAD, dtype=np.int64)
    distances = np.full((m, k), _DIST_PAD, dtype=np.float64)
    for i, (ids, dists) in enumerate(rows):
        c = len(ids)
        if c > k:
            raise ValueError(f"row {i} holds {c} results for k={k}")
        neighbors[i, :c] = ids
        distances[i, :c] = dists
    return neighbors, distances


def write_result(path, rec: RunRecord) -> None:
    def _write(tmp):
        with h5py.File(tmp, "w") as f:
            f.create_dataset("neighbors", data=rec.neighbors.astype(np.int64))
            f.create_dataset("times", data=rec.times.astype(np.float64))
            f.create_dataset("distances",
                             data=rec.distances.astype(np.float64))
            a = f.attrs
            a["dataset"] = rec.dataset
            a["k"] = rec.k
            a["mode"] = rec.mode
            a["algorithm"] = rec.algorithm
            a["label"] = rec.label
            a["group"] = rec.group
            a["query_params"] = json.dumps(rec.query_params)
            a["build_time"] = float(rec.build_time)
            if rec.index_size is not None:
                a["index_size"] = float(rec.index_size)
            a["stats"] = json.dumps(rec.stats)
            if rec.batch_wall_time is not None:
                a["batch_wall_time"] = float(rec.batch_wall_time)
            a["status"] = rec.status
            for key, v in rec.attrs.items():
                a["x-" + key] = str(v)

    _atomic_replace(Path(path), _write)


def read_result(path) -> RunRecord:
    path = Path(path)
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise FormatError(f"cannot open result file {path}: {e}") from e
    with f:
        for name in ("neighbors", "times", "distances"):
            if name not in f:
                raise FormatError(f"result file {path} is missing {name!r}")
        a = dict(f.attrs)
        try:
            return RunRecord(
                dataset=str(a["dataset"]),
                k=int(a["k"]),
                mode=str(a["mode"]),
                algorithm=str(a["algorithm"]),
                label=str(a["label"]),
                group=str(a.get("group", "")),
                query_params=json.loads(a["query_params"]),
                build_time=float(a["build_time"]),
                index_size=(float(a["index_size"])
                            if "index_size" in a else None),
                neighbors=f["neighbors"][()],
                times=f["times"][()],
                distances=f["distances"][()],
                stats=json.loads(a.get("stats", "{}")),
                batch_wall_time=(float(a["batch_wall_time"])
                                 if "batch_wall_time" in a else None),
                attrs={k[2:]: str(v) for k, v in a.items()
                       if k.startswith("x-")},
                status=str(a.get("status", STATUS_OK)),
            )
        except KeyError as e:
            raise FormatError(
                f"result file {path} is missing attribute {e.args[0]!r}") from e


def write_failure(path, rec: FailureRecord) -> None:
    payload = {
        "dataset": rec.dataset, "k": rec.k, "mode": rec.mode,
        "algorithm": rec.algorithm, "label": rec.label, "group": rec.group,
        "query_params": rec.query_params, "status": rec.status,
        "error": rec.error,
    }

    def _write(tmp):
        tmp.write_text(json.dumps(payload, indent=1) + "\n")

    _atomic_replace(Path(path), _write)


def read_failure(path) -> FailureRecord:
    try:
        payload = json.loads(Path(path).read_text())
        return FailureRecord(**payload)
    except (OSError, ValueError, TypeError) as e:
        raise FormatError(f"cannot read failure record {path}: {e}") from e


def _scan(root, dataset, k, mode, suffix):
    base = Path(root) / "results"
    if not base.is_dir():
        return
    datasets = [dataset] if dataset else sorted(p.name for p in base.iterdir())
    for ds in datasets:
        ks = ([str(k)] if k is not None else
              sorted(p.name for p in (base / ds).iterdir())
              if (base / ds).is_dir() else [])
        for kk in ks:
            modes = [mode] if mode else MODES
            for md in modes:
                d = base / ds / kk / md
                if not d.is_dir():
                    continue
                for alg in sorted(p.name for p in d.iterdir()):
                    for f in sorted((d / alg).glob("*" + suffix)):
                        yield f


def iter_result_paths(root, dataset=None, k=None, mode=None):
    yield from _scan(root, dataset, k, mode, RESULT_SUFFIX)


def iter_results(root, dataset=None, k=None, mode=None):
    for path in _scan(root, dataset, k, mode, RESULT_SUFFIX):
        yield read_result(path)


def iter_failures(root, dataset=None, k=None, mode=None):
    for path in _scan(root, dataset, k, mode, FAILURE_SUFFIX):
        yield read_failure(path)
