import json

import numpy as np
import pytest

from annbench.errors import FormatError
from annbench.results import (
    FailureRecord,
    RunRecord,
    failure_path,
    group_hash,
    iter_failures,
    iter_results,
    pad_results,
    read_failure,
    read_result,
    result_path,
    write_failure,
    write_result,
)


def make_record(**over):
    base = dict(
        dataset="toy", k=3, mode="single-query", algorithm="bruteforce",
        label='bruteforce []', group="g", query_params=[5],
        build_time=0.25, index_size=128.0,
        neighbors=np.array([[0, 1, 2], [3, 4, -1]], np.int64),
        times=np.array([0.01, 0.02]),
        distances=np.array([[0.1, 0.2, 0.3], [0.4, 0.5, np.inf]]),
        stats={"candidates": 12},
    )
    base.update(over)
    return RunRecord(**base)


def test_result_round_trip(tmp_path):
    rec = make_record(attrs={"pinned": "True"})
    p = result_path(tmp_path, rec.dataset, rec.k, rec.mode, rec.algorithm,
                    rec.label, rec.query_params)
    write_result(p, rec)
    back = read_result(p)
    for name in ("dataset", "k", "mode", "algorithm", "label", "group",
                 "query_params", "build_time", "index_size", "stats",
                 "status", "attrs"):
        assert getattr(back, name) == getattr(rec, name)
    assert np.array_equal(back.neighbors, rec.neighbors)
    assert np.array_equal(back.times, rec.times)
    assert np.array_equal(back.distances, rec.distances)


def test_unknown_index_size_round_trips_as_none(tmp_path):
    rec = make_record(index_size=None)
    p = tmp_path / "r.res"
    write_result(p, rec)
    assert read_result(p).index_size is None


def test_paths_are_stable_and_distinct(tmp_path):
    p1 = result_path(tmp_path, "ds", 10, "single-query", "alg", "alg [1]", [4])
    p2 = result_path(tmp_path, "ds", 10, "single-query", "alg", "alg [1]", [4])
    p3 = result_path(tmp_path, "ds", 10, "single-query", "alg", "alg [1]", [8])
    assert p1 == p2 and p1 != p3
    assert p1.parts[-6:-2] == ("results", "ds", "10", "single-query")
    assert p1.parts[-2] == "alg"
    assert group_hash("alg [1]", [4]) in p1.name


def test_no_partial_files_after_failed_write(tmp_path):
    rec = make_record(neighbors=np.array([[0, 1]]))  # wrong width vs times
    p = tmp_path / "bad.res"

    class Boom(RuntimeError):
        pass

    import annbench.results as R
    orig = R.h5py.File
    calls = {"n": 0}

    def exploding(path, mode):
        calls["n"] += 1
        raise Boom()

    R.h5py.File = exploding
    try:
        with pytest.raises(Boom):
            write_result(p, rec)
    finally:
        R.h5py.File = orig
    assert list(tmp_path.iterdir()) == []


def test_failure_record_round_trip(tmp_path):
    rec = FailureRecord(dataset="toy", k=3, mode="single-query",
                        algorithm="sleeper", label="sleeper []", group="g",
                        query_params=[], status="timed-out",
                        error="killed after 0.5s")
    p = failure_path(tmp_path, rec.dataset, rec.k, rec.mode, rec.algorithm,
                     rec.label, rec.query_params)
    write_failure(p, rec)
    assert read_failure(p) == rec
    assert json.loads(p.read_text())["status"] == "timed-out"


def test_iteration_filters(tmp_path):
    a = make_record()
    b = make_record(dataset="other", k=5)
    for rec in (a, b):
        write_result(result_path(tmp_path, rec.dataset, rec.k, rec.mode,
                                 rec.algorithm, rec.label, rec.query_params),
                     rec)
    fail = FailureRecord(dataset="toy", k=3, mode="single-query",
                         algorithm="x", label="x []", group="g",
                         query_params=[], status="failed")
    write_failure(failure_path(tmp_path, "toy", 3, "single-query", "x",
                               "x []", []), fail)
    assert len(list(iter_results(tmp_path))) == 2
    assert [r.dataset for r in iter_results(tmp_path, dataset="toy")] == ["toy"]
    assert len(list(iter_results(tmp_path, k=5))) == 1
    assert [f.status for f in iter_failures(tmp_path)] == ["failed"]
    assert list(iter_results(tmp_path / "nowhere")) == []


def test_read_rejects_damaged_file(tmp_path):
    p = tmp_path / "x.res"
    p.write_bytes(b"not hdf5 at all")
    with pytest.raises(FormatError):
        read_result(p)
    import h5py
    q = tmp_path / "y.res"
    with h5py.File(q, "w") as f:
        f.create_dataset("neighbors", data=np.zeros((1, 1), np.int64))
    with pytest.raises(FormatError, match="times"):
        read_result(q)


def test_pad_results():
    nb, dist = pad_results(
        [(np.array([4, 2]), np.array([0.1, 0.2])),
         (np.array([], np.int64), np.array([]))], k=3)
    assert nb.tolist() == [[4, 2, -1], [-1, -1, -1]]
    assert dist[0].tolist() == [0.1, 0.2, np.inf]
    assert np.all(np.isinf(dist[1]))
    with pytest.raises(ValueError):
        pad_results([(np.arange(4), np.zeros(4))], k=3)
