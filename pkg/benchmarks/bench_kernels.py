"""Times the compiled distance kernels against the numpy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --n 50000 --dims 16 128 --repeat 7

Each cell is the best mean over --repeat timeit batches, reported as
microseconds per call together with the compiled/numpy speedup. Before
timing anything the two backends are cross-checked on the same inputs
(rtol 1e-12), so a silently diverging extension build fails here first.
"""

import argparse
import sys
import timeit

import numpy as np

from annbench.kernels import numpy_impl

try:
    from annbench.kernels import _ckernels
except ImportError:
    _ckernels = None


def best_us(fn):
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    return min(timer.repeat(repeat=ARGS.repeat, number=loops)) / loops * 1e6


def check_agreement(points, queries, packed, packed_q):
    for code in (numpy_impl.EUCLIDEAN, numpy_impl.ANGULAR):
        for q in queries[:3]:
            a = numpy_impl.dense_dists(points, q, code)
            b = _ckernels.dense_dists(points, q, code)
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    a = numpy_impl.hamming_dists(packed, packed_q)
    b = _ckernels.hamming_dists(packed, packed_q)
    np.testing.assert_array_equal(a, b)
    d = numpy_impl.dense_dists(points, queries[0], numpy_impl.EUCLIDEAN)
    ia, va = numpy_impl.top_k(d, 10)
    ib, vb = _ckernels.top_k(d, 10)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_array_equal(va, vb)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20000,
                        help="train points per case (default 20000)")
    parser.add_argument("--dims", type=int, nargs="+", default=[16, 128])
    parser.add_argument("--bits", type=int, default=256,
                        help="hamming dimension (default 256)")
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    global ARGS
    ARGS = parser.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; nothing to compare "
              "(pip install -e . --no-build-isolation)", file=sys.stderr)
        return 1

    rng = np.random.default_rng(ARGS.seed)
    cases = []
    for d in ARGS.dims:
        points = rng.random((ARGS.n, d), dtype=np.float32)
        queries = rng.random((8, d), dtype=np.float32)
        for label, code in (("euclidean", numpy_impl.EUCLIDEAN),
                            ("angular", numpy_impl.ANGULAR)):
            cases.append((
                f"dense_dists {label} n={ARGS.n} d={d}",
                points, queries, code))

    words = (ARGS.bits + 63) // 64
    packed = rng.integers(0, 2 ** 63, (ARGS.n, words), dtype=np.uint64)
    packed_q = rng.integers(0, 2 ** 63, words, dtype=np.uint64)

    first = rng.random((ARGS.n, ARGS.dims[0]), dtype=np.float32)
    check_agreement(first, rng.random((8, ARGS.dims[0]), dtype=np.float32),
                    packed, packed_q)
    print("backends agree on shared inputs\n")

    width = max(len(c[0]) for c in cases) + 2
    header = f"{'kernel':<{width}} {'numpy':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))

    def row(name, numpy_fn, c_fn):
        t_np = best_us(numpy_fn)
        t_c = best_us(c_fn)
        print(f"{name:<{width}} {t_np:>10.1f}us {t_c:>10.1f}us "
              f"{t_np / t_c:>8.2f}x")

    for name, points, queries, code in cases:
        q = queries[0]
        row(name,
            lambda: numpy_impl.dense_dists(points, q, code),
            lambda: _ckernels.dense_dists(points, q, code))

    row(f"hamming_dists n={ARGS.n} bits={ARGS.bits}",
        lambda: numpy_impl.hamming_dists(packed, packed_q),
        lambda: _ckernels.hamming_dists(packed, packed_q))

    dists = rng.random(ARGS.n)
    row(f"top_k n={ARGS.n} k={ARGS.k}",
        lambda: numpy_impl.top_k(dists, ARGS.k),
        lambda: _ckernels.top_k(dists, ARGS.k))
    return 0


if __name__ == "__main__":
    sys.exit(main())
