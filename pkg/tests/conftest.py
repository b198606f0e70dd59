import numpy as np
import pytest

from flarevt import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Pay any JIT compilation cost before timed test sections run."""
    y = np.array([0.5, 1.0, 2.0])
    t = np.arange(3, dtype=np.int64)
    for nll, scan in ((_kernels.gpd_nll, _kernels.decluster_scan),
                      (_kernels.gpd_nll_numba, _kernels.decluster_scan_numba)):
        if nll is None:
            continue
        nll(y, 1.0, 0.2)
        nll(y, 1.0, 0.0)
        scan(t, y, 0.9, 2)
