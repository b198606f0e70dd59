"""Hot numeric kernels, compiled with numba when available.

Two kernels dominate runtime on multi-decade minute-cadence inputs: the
declustering scan (one pass over up to ~1.6e7 samples, repeated across a
gap sweep) and the generalized Pareto negative log-likelihood (evaluated
hundreds of times per fit by the simplex optimizer).

Both carry a pure-numpy implementation.  The backend is chosen once at
import time: setting ``FLAREVT_DISABLE_NUMBA=1`` (or ``NUMBA_DISABLE_JIT=1``,
or numba being unimportable) selects the numpy path.  Results are identical
for the declustering scan; the likelihood sums may differ in the last few
ulps because numpy uses pairwise summation.
"""

from __future__ import annotations

import os

import numpy as np

SHAPE_SWITCH_TOL = 1e-6  # |shape| below this uses the exponential limit

_I64_MAX = np.iinfo(np.int64).max


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_DISABLED = _env_flag("FLAREVT_DISABLE_NUMBA") or os.environ.get("NUMBA_DISABLE_JIT") == "1"


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def gpd_nll_numpy(excesses: np.ndarray, scale: float, shape: float) -> float:
    """Negative log-likelihood of nonnegative excesses under GPD(scale, shape).

    Returns +inf when any excess lies outside the support (only possible
    for shape < 0), which lets the optimizer treat the support boundary as
    a hard wall.
    """
    k = excesses.size
    if abs(shape) < SHAPE_SWITCH_TOL:
        return k * np.log(scale) + float(excesses.sum()) / scale
    z = shape * excesses / scale
    if z.min(initial=np.inf) <= -1.0:
        return np.inf
    return k * np.log(scale) + (1.0 + 1.0 / shape) * float(np.log1p(z).sum())


def decluster_scan_numpy(times_min: np.ndarray, flux: np.ndarray,
                         threshold: float, gap_minutes: int):
    """Group threshold exceedances into clusters of dependent activity.

    Two consecutive exceedances belong to the same cluster when fewer than
    ``gap_minutes`` wall-clock minutes without an exceedance separate them.
    Minutes that are missing (NaN flux) or absent from the grid count as
    quiet, so the rule depends only on exceedance timestamps.

    Parameters
    ----------
    times_min : int64 array
        Sample timestamps as minutes since an arbitrary epoch, strictly
        increasing.
    flux : float64 array
        Sample values; NaN marks missing data.
    threshold : float
        A sample with flux >= threshold is an exceedance.
    gap_minutes : int
        Quiet-run length that separates independent clusters.

    Returns
    -------
    first_idx, last_idx, peak_idx, exc_counts : int64 arrays
        Per cluster: index of the first and last exceedance, index of the
        peak (first occurrence of the maximum), and the number of
        exceedance samples.
    """
    exc = np.flatnonzero(flux >= threshold)
    if exc.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy(), empty.copy()
    t = times_min[exc]
    is_new = np.empty(exc.size, dtype=bool)
    is_new[0] = True
    np.greater(np.diff(t), gap_minutes, out=is_new[1:])
    seg_start = np.flatnonzero(is_new)
    exc_counts = np.diff(np.append(seg_start, exc.size)).astype(np.int64)

    flux_exc = flux[exc]
    peak_val = np.maximum.reduceat(flux_exc, seg_start)
    seg_id = np.repeat(np.arange(seg_start.size), exc_counts)
    candidate = np.where(flux_exc == peak_val[seg_id], exc, _I64_MAX)
    peak_idx = np.minimum.reduceat(candidate, seg_start)

    first_idx = exc[seg_start]
    last_idx = exc[np.append(seg_start[1:], exc.size) - 1]
    return (first_idx.astype(np.int64), last_idx.astype(np.int64),
            peak_idx.astype(np.int64), exc_counts)


# ---------------------------------------------------------------------------
# numba implementations (same contracts, loop form)
# ---------------------------------------------------------------------------

NUMBA_AVAILABLE = False
gpd_nll_numba = None
decluster_scan_numba = None

if not NUMBA_DISABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay safe
        numba = None

    if numba is not None:
        @numba.njit(cache=True)
        def _gpd_nll_jit(excesses, scale, shape):  # pragma: no cover - compiled
            # sum of logs computed as the log of a running product with
            # range-guarded renormalization: one libm call per ~hundreds
            # of samples instead of one log1p per sample
            k = excesses.size
            if abs(shape) < SHAPE_SWITCH_TOL:
                acc = 0.0
                for i in range(k):
                    acc += excesses[i]
                return k * np.log(scale) + acc / scale
            rate = shape / scale
            log_sum = 0.0
            prod = 1.0
            for i in range(k):
                f = 1.0 + rate * excesses[i]
                if f <= 0.0:
                    return np.inf
                if f < 1e-150 or f > 1e150:
                    log_sum += np.log(f)
                else:
                    prod *= f
                    if prod < 1e-150 or prod > 1e150:
                        log_sum += np.log(prod)
                        prod = 1.0
            log_sum += np.log(prod)
            return k * np.log(scale) + (1.0 + 1.0 / shape) * log_sum

        @numba.njit(cache=True)
        def _decluster_scan_jit(times_min, flux, threshold, gap_minutes):  # pragma: no cover
            n = times_min.size
            n_exc = 0
            for i in range(n):
                if flux[i] >= threshold:
                    n_exc += 1
            first_idx = np.empty(n_exc, np.int64)
            last_idx = np.empty(n_exc, np.int64)
            peak_idx = np.empty(n_exc, np.int64)
            exc_counts = np.empty(n_exc, np.int64)
            k = -1
            last_t = np.int64(0)
            for i in range(n):
                f = flux[i]
                if f >= threshold:
                    t = times_min[i]
                    if k < 0 or t - last_t > gap_minutes:
                        k += 1
                        first_idx[k] = i
                        peak_idx[k] = i
                        exc_counts[k] = 0
                    last_idx[k] = i
                    exc_counts[k] += 1
                    if f > flux[peak_idx[k]]:
                        peak_idx[k] = i
                    last_t = t
            m = k + 1
            return (first_idx[:m].copy(), last_idx[:m].copy(),
                    peak_idx[:m].copy(), exc_counts[:m].copy())

        NUMBA_AVAILABLE = True
        gpd_nll_numba = _gpd_nll_jit
        decluster_scan_numba = _decluster_scan_jit


USE_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED

if USE_NUMBA:
    gpd_nll = gpd_nll_numba
    decluster_scan = decluster_scan_numba
else:
    gpd_nll = gpd_nll_numpy
    decluster_scan = decluster_scan_numpy


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
