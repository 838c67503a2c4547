import numpy as np
import pytest

import annbench.kernels.numpy_impl as numpy_backend

try:
    import annbench.kernels._ckernels as compiled_backend
except ImportError:
    compiled_backend = None

BACKENDS = [numpy_backend] + (
    [compiled_backend] if compiled_backend is not None else []
)


@pytest.fixture(params=BACKENDS, ids=lambda b: b.BACKEND_NAME)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(0xA11B)
