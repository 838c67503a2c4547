"""Frontier math against the quadratic oracle, plus the report artifacts."""

import numpy as np
import pytest

from annbench.errors import UsageError
from annbench.metrics import HIGHER, LOWER
from annbench.report import (algorithm_color, algorithm_marker,
                             collect_points, mark_frontiers, pareto_frontier,
                             read_points_csv, render, render_site)
from annbench.results import RunRecord, result_path, write_result

from oracles import oracle_pareto


# ----------------------------------------------------------------- frontier

def test_frontier_strict_domination():
    assert pareto_frontier([(0.5, 100), (0.6, 110)]) == [1]


def test_frontier_mutually_nondominated():
    idx = pareto_frontier([(0.5, 100), (0.6, 90), (0.55, 95)])
    assert sorted(idx) == [0, 1, 2]
    # ordered by x
    assert idx == [0, 2, 1]


def test_frontier_empty():
    assert pareto_frontier([]) == []


def test_frontier_equal_x_keeps_best_y():
    assert pareto_frontier([(0.5, 1.0), (0.5, 2.0)]) == [1]


def test_frontier_exact_duplicates_survive_together():
    idx = pareto_frontier([(0.5, 2.0), (0.5, 2.0), (0.5, 1.0)])
    assert sorted(idx) == [0, 1]


def test_frontier_lower_better_axes():
    # build-time style: smaller is better on both axes
    pts = [(1.0, 10.0), (2.0, 5.0), (3.0, 20.0), (0.5, 30.0)]
    idx = pareto_frontier(pts, LOWER, LOWER)
    assert sorted(idx) == [0, 1, 3]


def test_frontier_rejects_non_finite():
    with pytest.raises(UsageError):
        pareto_frontier([(0.5, float("inf"))])
    with pytest.raises(UsageError):
        pareto_frontier([(float("nan"), 1.0)])


@pytest.mark.parametrize("x_orient,y_orient", [
    (HIGHER, HIGHER), (HIGHER, LOWER), (LOWER, HIGHER), (LOWER, LOWER)])
def test_frontier_matches_quadratic_oracle(rng, x_orient, y_orient):
    pts = [tuple(row) for row in rng.integers(0, 40, (1000, 2)).astype(float)]
    got = pareto_frontier(pts, x_orient, y_orient)
    want = oracle_pareto(pts, x_orient == HIGHER, y_orient == HIGHER)
    assert sorted(got) == sorted(want)


def test_frontier_is_idempotent(rng):
    pts = [tuple(row) for row in rng.random((200, 2))]
    first = pareto_frontier(pts)
    front = [pts[i] for i in first]
    again = pareto_frontier(front)
    assert [front[i] for i in again] == front


def test_dominated_point_never_changes_frontier(rng):
    for _ in range(20):
        pts = [tuple(row) for row in rng.random((50, 2))]
        base = {pts[i] for i in pareto_frontier(pts)}
        donor = pts[int(rng.integers(0, len(pts)))]
        dominated = (donor[0] - 0.1, donor[1] - 0.1)
        with_extra = pts + [dominated]
        assert {with_extra[i]
                for i in pareto_frontier(with_extra)} == base


# ---------------------------------------------------------------- styling

def test_colors_and_markers_deterministic():
    assert algorithm_color("rpforest") == algorithm_color("rpforest")
    assert algorithm_marker("rpforest") == algorithm_marker("rpforest")
    assert algorithm_color("rpforest") != algorithm_color("bruteforce")


# ------------------------------------------------------------- artifacts

M, K = 4, 2
GT = np.full((M, K), 2.0)


def fake_run(workdir, algorithm, label, query_params, recall_frac,
             total_time, mode="single-query"):
    """Result file whose recall and QPS come out to chosen values."""
    hit = round(recall_frac * K)
    distances = np.tile(
        np.array([1.0] * hit + [99.0] * (K - hit)), (M, 1))
    rec = RunRecord(
        dataset="synth", k=K, mode=mode, algorithm=algorithm, label=label,
        group="g", query_params=query_params, build_time=1.0,
        index_size=512.0,
        neighbors=np.zeros((M, K), dtype=np.int64),
        times=np.full(M, total_time / M), distances=distances,
        stats={"candidates": 10},
        batch_wall_time=total_time if mode == "batch" else None)
    path = result_path(workdir, "synth", K, mode, algorithm, label,
                       query_params)
    write_result(path, rec)
    return path


@pytest.fixture()
def workdir(tmp_path):
    # alpha: two frontier runs plus one dominated by both
    fake_run(tmp_path, "alpha", "alpha [1]", [10], 0.5, 0.04)
    fake_run(tmp_path, "alpha", "alpha [1]", [20], 1.0, 0.4)
    fake_run(tmp_path, "alpha", "alpha [1]", [30], 0.5, 0.4)
    # beta: one frontier run, one dominated
    fake_run(tmp_path, "beta", "beta [2]", [1], 0.5, 0.08)
    fake_run(tmp_path, "beta", "beta [2]", [2], 0.5, 0.8)
    return tmp_path


def test_collect_and_mark(workdir):
    points = collect_points(workdir, "synth", K, "single-query",
                            "recall", "qps", GT)
    assert len(points) == 5
    frontiers = mark_frontiers(points, HIGHER, HIGHER)
    assert sorted(frontiers) == ["alpha", "beta"]
    alpha = frontiers["alpha"]
    assert [(p.x, p.y) for p in alpha] == [(0.5, 100.0), (1.0, 10.0)]
    assert [(p.x, p.y) for p in frontiers["beta"]] == [(0.5, 50.0)]
    flags = sorted((p.x, p.y, p.on_frontier) for p in points)
    assert (0.5, 10.0, False) in flags
    assert (0.5, 5.0, False) in flags


def test_render_artifacts(workdir):
    out = render(workdir, "synth", K, GT, scatter=True)
    svg = out["svg"].read_text()
    assert svg.count("<svg") == 1
    assert "alpha" in svg and "beta" in svg
    assert out["scatter_svg"].exists()

    tex = out["tex"].read_text()
    assert tex.count("\\addplot") == 2
    assert "\\addlegendentry{alpha}" in tex
    assert "ymode=log" in tex

    lines = out["csv"].read_text().splitlines()
    assert lines[0] == "x,y,algorithm,instance,group,result_file,on_frontier"
    assert len(lines) == 6


def test_csv_round_trip_reproduces_frontier(workdir):
    out = render(workdir, "synth", K, GT)
    reloaded = read_points_csv(out["csv"])
    original = out["points"]
    assert [(p.x, p.y, p.algorithm) for p in reloaded] == \
        [(p.x, p.y, p.algorithm) for p in original]
    re_frontiers = mark_frontiers(
        [p for p in reloaded], HIGHER, HIGHER)
    assert {(p.x, p.y) for p in re_frontiers["alpha"]} == {
        (p.x, p.y) for p in original if p.on_frontier
        and p.algorithm == "alpha"}


def test_rerender_is_deterministic(workdir):
    import shutil
    first = render(workdir, "synth", K, GT)
    csv_once = first["csv"].read_bytes()
    tex_once = first["tex"].read_bytes()
    shutil.rmtree(workdir / "reports")
    second = render(workdir, "synth", K, GT)
    assert second["csv"].read_bytes() == csv_once
    assert second["tex"].read_bytes() == tex_once


def test_unknown_metric_lists_registry(workdir):
    with pytest.raises(UsageError, match="known:"):
        render(workdir, "synth", K, GT, x_name="bogus")


def test_batch_runs_stay_separate(workdir):
    fake_run(workdir, "alpha", "alpha [1]", [10], 1.0, 0.2, mode="batch")
    single = collect_points(workdir, "synth", K, "single-query",
                            "recall", "qps", GT)
    batch = collect_points(workdir, "synth", K, "batch",
                           "recall", "qps", GT)
    assert len(single) == 5
    assert len(batch) == 1
    assert batch[0].y == pytest.approx(M / 0.2)

    page = render_site(workdir, lambda ds: GT)
    text = page.read_text()
    assert text.count("<section>") == 2
    assert "batch mode" in text
    # single-query section comes first
    assert text.index("synth, k=2</h2>") < text.index("batch mode")


def test_site_lists_provenance(workdir):
    page = render_site(workdir, lambda ds: GT)
    text = page.read_text()
    points = collect_points(workdir, "synth", K, "single-query",
                            "recall", "qps", GT)
    for p in points:
        assert p.result_file in text


def test_site_with_no_results(tmp_path):
    page = render_site(tmp_path, lambda ds: GT)
    assert "No results yet" in page.read_text()
