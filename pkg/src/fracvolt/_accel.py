"""Hot numerical kernels, JIT-compiled when numba is available.

Every kernel has a pure-NumPy twin with identical semantics. Selection:

* ``FRACVOLT_NO_NUMBA=1`` in the environment forces the NumPy path;
* otherwise numba is used when it imports cleanly.

FFT-based code stays in plain NumPy throughout the package (numba does not
support np.fft); only loop-bound kernels live here.
"""
from __future__ import annotations

import os

import numpy as np
from numpy.polynomial import hermite_e

_DISABLED = os.environ.get("FRACVOLT_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by FRACVOLT_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

__all__ = [
    "HAS_NUMBA",
    "backend",
    "direct_convolution",
    "car2_euler",
    "hermite_series",
]


def backend() -> str:
    """Name of the active kernel backend."""
    return "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pure-NumPy reference implementations
# ---------------------------------------------------------------------------

def _direct_convolution_np(kernel: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """out[m] = sum_{j<m} kernel[m-j] * increments[j], m = 0..len(increments).

    kernel[0] is ignored by construction (lag 0 never enters the sum).
    """
    n = increments.shape[0]
    lagged = kernel.copy()
    lagged[0] = 0.0
    full = np.convolve(lagged, increments)
    out = np.empty(n + 1)
    out[0] = 0.0
    out[1:] = full[1 : n + 1]
    return out


def _car2_euler_np(theta0: float, theta1: float, dt: float, increments: np.ndarray) -> np.ndarray:
    n = increments.shape[0]
    out = np.zeros((2, n + 1))
    x = 0.0
    v = 0.0
    for m in range(n):
        v_next = v + (theta0 * x + theta1 * v) * dt + increments[m]
        x_next = x + v * dt
        x, v = x_next, v_next
        out[0, m + 1] = x
        out[1, m + 1] = v
    return out


def _hermite_series_np(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    return hermite_e.hermeval(z, coeffs)


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _direct_convolution_nb(kernel, increments):  # pragma: no cover - jitted
        n = increments.shape[0]
        out = np.zeros(n + 1)
        for m in range(1, n + 1):
            acc = 0.0
            for j in range(m):
                acc += kernel[m - j] * increments[j]
            out[m] = acc
        return out

    @njit(cache=True)
    def _car2_euler_nb(theta0, theta1, dt, increments):  # pragma: no cover - jitted
        n = increments.shape[0]
        out = np.zeros((2, n + 1))
        x = 0.0
        v = 0.0
        for m in range(n):
            v_next = v + (theta0 * x + theta1 * v) * dt + increments[m]
            x_next = x + v * dt
            x = x_next
            v = v_next
            out[0, m + 1] = x
            out[1, m + 1] = v
        return out

    @njit(cache=True)
    def _hermite_series_nb(coeffs, z):  # pragma: no cover - jitted
        n = z.shape[0]
        L = coeffs.shape[0]
        out = np.empty(n)
        for i in range(n):
            zi = z[i]
            h_prev = 1.0
            acc = coeffs[0]
            if L > 1:
                h_cur = zi
                acc += coeffs[1] * h_cur
                for l in range(1, L - 1):
                    h_next = zi * h_cur - l * h_prev
                    h_prev = h_cur
                    h_cur = h_next
                    acc += coeffs[l + 1] * h_cur
            out[i] = acc
        return out

    direct_convolution = _direct_convolution_nb
    car2_euler = _car2_euler_nb
    _hermite_series_impl = _hermite_series_nb
else:
    direct_convolution = _direct_convolution_np
    car2_euler = _car2_euler_np
    _hermite_series_impl = _hermite_series_np


def hermite_series(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate sum_l coeffs[l] * He_l(z) elementwise (probabilists' basis)."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    flat = np.ascontiguousarray(z.ravel())
    return np.asarray(_hermite_series_impl(coeffs, flat)).reshape(z.shape)
