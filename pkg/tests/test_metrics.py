import numpy as np
import pytest

from annbench.errors import UsageError
from annbench.metrics import (
    REGISTRY,
    compute_metric,
    get_metric,
    qps,
    recall,
    recall_eps,
)
from annbench.results import RunRecord, pad_results


def run_with(dists, k=None, times=None, **over):
    """RunRecord whose per-query returned distances are given directly."""
    rows = [(np.arange(len(d)), np.asarray(d, float)) for d in dists]
    k = k or max((len(d) for d in dists), default=1)
    nb, dd = pad_results(rows, k)
    m = len(dists)
    base = dict(
        dataset="toy", k=k, mode="single-query", algorithm="a",
        label="a []", group="g", query_params=[],
        build_time=1.0, index_size=1000.0,
        neighbors=nb, times=np.asarray(times if times is not None
                                       else [0.001] * m),
        distances=dd, stats={},
    )
    base.update(over)
    return RunRecord(**base)


def test_exact_result_scores_one():
    gt = np.array([[1.0, 2.0, 3.0]])
    assert recall(gt, run_with([[1.0, 2.0, 3.0]])) == 1.0


def test_tie_case_from_the_recall_definition():
    # true distances (1,2); returned points at distances (2,2): both lie
    # within the k-th true distance, so recall is 1.0, not 0.5
    gt = np.array([[1.0, 2.0]])
    assert recall(gt, run_with([[2.0, 2.0]])) == 1.0


def test_empty_result_scores_zero():
    gt = np.array([[1.0, 2.0]])
    assert recall(gt, run_with([[]], k=2)) == 0.0


def test_recall_is_mean_over_queries():
    gt = np.array([[1.0, 2.0], [1.0, 2.0]])
    run = run_with([[1.0, 2.0], [5.0, 6.0]])
    assert recall(gt, run) == 0.5


def test_recall_tau_slack_absorbs_float_noise():
    gt = np.array([[1.0, 2.0]])
    eps_in = 2.0 * (1 + 5e-7)   # within tau of the threshold
    eps_out = 2.0 * (1 + 5e-6)  # beyond it
    assert recall(gt, run_with([[1.0, eps_in]])) == 1.0
    assert recall(gt, run_with([[1.0, eps_out]])) == 0.5


def test_recall_uses_kth_distance_of_the_run_k():
    # ground truth stored deeper than the run's k
    gt = np.array([[1.0, 2.0, 9.0, 9.5]])
    run = run_with([[2.0, 2.0]], k=2)
    assert recall(gt, run) == 1.0


def test_recall_errors():
    run = run_with([[1.0]])
    with pytest.raises(UsageError, match="ground-truth"):
        recall(None, run)
    with pytest.raises(UsageError, match="deep"):
        recall(np.zeros((1, 0)), run)
    with pytest.raises(UsageError, match="rows"):
        recall(np.zeros((3, 2)), run)


def test_eps_recall_threshold_arithmetic():
    gt = np.array([[1.0]])
    run = run_with([[1.05]])
    assert recall(gt, run) == 0.0
    assert recall_eps(gt, run, {"eps": 0.1}) == 1.0


def test_eps_recall_monotone_and_at_least_recall(rng):
    # a synthetic low-recall run: returned distances scattered around the
    # true threshold
    m, k = 40, 5
    gt = np.sort(rng.random((m, k)), axis=1)
    returned = gt * rng.uniform(0.8, 1.6, size=gt.shape)
    run = run_with(list(returned), k=k)
    base = recall(gt, run)
    values = [recall_eps(gt, run, {"eps": e})
              for e in (0.001, 0.01, 0.05, 0.1, 0.5, 2.0)]
    assert 0.0 < base < 1.0
    assert all(v >= base for v in values)
    assert values == sorted(values)
    assert all(0.0 <= v <= 1.0 for v in values)


def test_eps_must_be_positive():
    gt = np.array([[1.0]])
    run = run_with([[1.0]])
    with pytest.raises(UsageError, match="positive"):
        recall_eps(gt, run, {"eps": 0.0})


def test_qps_arithmetic():
    run = run_with([[1.0]] * 4, times=[2.0] * 4)
    assert qps(None, run) == 0.5
    one = run_with([[1.0]], times=[0.5])
    assert qps(None, one) == 2.0


def test_qps_many_queries():
    run = run_with([[0.0]] * 10000, times=[8.0 / 10000] * 10000)
    assert qps(None, run) == pytest.approx(1250.0)


def test_qps_zero_time_warns():
    run = run_with([[1.0]], times=[0.0])
    notes = []
    assert qps(None, run, warn=notes.append) == np.inf
    assert notes and "inf" in notes[0]


def test_qps_batch_uses_batch_wall_time():
    run = run_with([[1.0]] * 8, times=[0.0] * 8, mode="batch",
                   batch_wall_time=2.0)
    assert qps(None, run) == 4.0


def test_plain_reads_and_ratios():
    run = run_with([[1.0]] * 2, times=[0.005, 0.005],
                   stats={"candidates": 50})
    assert compute_metric("build-time", None, run) == 1.0
    assert compute_metric("index-size", None, run) == 1000.0
    assert compute_metric("dist-comps", None, run) == 25.0
    assert compute_metric("qps", None, run) == 200.0
    assert compute_metric("index-size-per-qps", None, run) == 5.0


def test_missing_fields_report_missing_not_zero():
    run = run_with([[1.0]], index_size=None, stats={})
    assert compute_metric("index-size", None, run) is None
    assert compute_metric("dist-comps", None, run) is None
    assert compute_metric("index-size-per-qps", None, run) is None


def test_registry_contents():
    names = set(REGISTRY)
    assert {"recall", "recall-eps-0.01", "recall-eps-0.1", "qps",
            "build-time", "index-size", "dist-comps",
            "index-size-per-qps"} <= names
    assert get_metric("recall").orientation == "higher-better"
    assert get_metric("build-time").orientation == "lower-better"
    with pytest.raises(UsageError, match="unknown metric"):
        get_metric("rank-error")
    # descriptors carry their own params
    gt = np.array([[1.0]])
    run = run_with([[1.05]])
    assert compute_metric("recall-eps-0.1", gt, run) == 1.0
    assert compute_metric("recall-eps-0.01", gt, run) == 0.0
