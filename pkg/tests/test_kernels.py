import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annbench import kernels
from annbench.core import pack_bits
from tests.conftest import BACKENDS


def test_euclidean_345(backend):
    X = np.array([[3.0, 4.0]], dtype=np.float32)
    q = np.zeros(2, dtype=np.float32)
    assert backend.dense_dists(X, q, backend.EUCLIDEAN)[0] == 5.0


def test_angular_identity_is_exactly_zero(backend, rng):
    X = rng.normal(size=(20, 7)).astype(np.float32)
    for i in range(len(X)):
        d = backend.dense_dists(X[i : i + 1], X[i].copy(), backend.ANGULAR)
        assert d[0] == 0.0


def test_hamming_bit_count(backend):
    a = pack_bits(np.array([1, 0, 1, 0], dtype=np.uint8))
    b = pack_bits(np.array([0, 1, 1, 0], dtype=np.uint8))
    assert backend.hamming_dists(a, b[0])[0] == 2.0


def test_angular_zero_norm_raises(backend):
    X = np.zeros((3, 4), dtype=np.float32)
    q = np.ones(4, dtype=np.float32)
    with pytest.raises(ValueError):
        backend.dense_dists(X, q, backend.ANGULAR)
    with pytest.raises(ValueError):
        backend.dense_dists(np.ones((3, 4), np.float32),
                            np.zeros(4, np.float32), backend.ANGULAR)


def test_top_k_breaks_ties_by_smaller_id(backend):
    d = np.array([2.0, 1.0, 1.0, 2.0, 0.5], dtype=np.float64)
    ids, vals = backend.top_k(d, 3)
    assert ids.tolist() == [4, 1, 2]
    assert vals.tolist() == [0.5, 1.0, 1.0]


def test_top_k_all_equal(backend):
    d = np.zeros(10)
    ids, _ = backend.top_k(d, 4)
    assert ids.tolist() == [0, 1, 2, 3]


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backends_agree(rng):
    a, b = BACKENDS
    X = rng.normal(size=(500, 24)).astype(np.float32)
    q = rng.normal(size=24).astype(np.float32)
    for code in (kernels.EUCLIDEAN, kernels.ANGULAR):
        da = a.dense_dists(X, q, code)
        db = b.dense_dists(X, q, code)
        np.testing.assert_allclose(da, db, rtol=1e-12, atol=1e-15)
        ia, va = a.top_k(da, 10)
        ib, vb = b.top_k(db, 10)
        assert ia.tolist() == ib.tolist()
    bits = (rng.random((200, 33)) > 0.5).astype(np.uint8)
    qb = (rng.random(33) > 0.5).astype(np.uint8)
    np.testing.assert_array_equal(
        a.hamming_dists(pack_bits(bits), pack_bits(qb)[0]),
        b.hamming_dists(pack_bits(bits), pack_bits(qb)[0]),
    )


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 40),
    d=st.integers(1, 33),
    seed=st.integers(0, 2**32 - 1),
)
def test_row_slice_reproduces_full_scan(n, d, seed):
    """Scanning one row alone gives bitwise the same distance as in bulk."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)).astype(np.float32)
    q = rng.normal(size=d).astype(np.float32)
    for backend in BACKENDS:
        for code in (backend.EUCLIDEAN, backend.ANGULAR):
            full = backend.dense_dists(X, q, code)
            for i in range(n):
                single = backend.dense_dists(X[i : i + 1].copy(), q, code)
                assert single[0] == full[i]


@settings(max_examples=50, deadline=None)
@given(d=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
def test_swapping_roles_is_exact(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=d).astype(np.float32)
    b = rng.normal(size=d).astype(np.float32)
    for backend in BACKENDS:
        for code in (backend.EUCLIDEAN, backend.ANGULAR):
            ab = backend.dense_dists(a[None, :].copy(), b, code)[0]
            ba = backend.dense_dists(b[None, :].copy(), a, code)[0]
            assert ab == ba
