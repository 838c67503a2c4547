"""Hot-loop kernels with backend selection at import time.

The compiled extension is preferred when present; the numpy implementation
is the fallback. ANNBENCH_KERNELS=numpy|c forces a backend (``c`` fails
loudly if the extension was not built).
"""

import os

from . import numpy_impl

EUCLIDEAN = numpy_impl.EUCLIDEAN
ANGULAR = numpy_impl.ANGULAR

_requested = os.environ.get("ANNBENCH_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "c", "compiled"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested in ("c", "compiled"):
            raise ImportError(
                "ANNBENCH_KERNELS=c but the compiled extension is not built"
            )
        _impl = numpy_impl
elif _requested == "numpy":
    _impl = numpy_impl
else:
    raise ImportError(f"unknown ANNBENCH_KERNELS value {_requested!r}")

BACKEND = _impl.BACKEND_NAME

dense_dists = _impl.dense_dists
hamming_dists = _impl.hamming_dists
top_k = _impl.top_k
