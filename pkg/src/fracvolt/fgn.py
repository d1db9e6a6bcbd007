"""Exact fractional Gaussian noise and fBm sampling on uniform grids.

Sampling is exact (not approximate synthesis): the stationary covariance of
the increments is embedded in a circulant matrix whose spectral square root
is applied to complex white noise, an O(N log N) procedure. Randomness is
keyed by (seed, path_index) through a counter-based generator so that paths
drawn in parallel are reproducible regardless of worker count.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import NegativeEigenvalue, ValidationError

__all__ = [
    "HurstParam",
    "SimGrid",
    "GaussianPath",
    "fgn_autocovariance",
    "circulant_eigenvalues",
    "generate_fgn",
    "fbm_from_fgn",
    "write_path_csv",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HurstParam:
    """Hurst index, restricted to the long-memory regime 1/2 < h < 1.

    h = 1/2 is rejected: the two-point kernels |v-u|^{2h-2} that the
    asymptotic theory integrates against degenerate there.
    """

    h: float

    def __post_init__(self):
        if not (0.5 < float(self.h) < 1.0):
            raise ValidationError(f"Hurst index must satisfy 1/2 < h < 1, got {self.h}")
        object.__setattr__(self, "h", float(self.h))


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid t_m = m*dt, m = 0..n_steps; horizon T = n_steps*dt.

    n_steps = 0 is tolerated only as the degenerate single-point grid {0}
    (needed so that an empty increment array still maps to a path).
    """

    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValidationError(f"n_steps must be a nonnegative integer, got {self.n_steps}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class GaussianPath:
    """A sampled trajectory on a SimGrid; values[0] = 0 always."""

    grid: SimGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_steps + 1,):
            raise ValidationError(
                f"values must have length n_steps+1 = {self.grid.n_steps + 1}, got {values.shape}"
            )
        if values[0] != 0.0:
            raise ValidationError("paths start at 0: values[0] must be 0")
        object.__setattr__(self, "values", values)


def _hurst(h) -> float:
    if isinstance(h, HurstParam):
        return h.h
    return HurstParam(float(h)).h


def fgn_autocovariance(k, h) -> float | np.ndarray:
    """Autocovariance rho(k) of unit-step fBm increments at integer lag k >= 0.

    rho(k) = ((k+1)^{2h} + |k-1|^{2h} - 2 k^{2h}) / 2; rho(0) = 1.
    """
    hh = _hurst(h)
    lag = np.asarray(k, dtype=np.float64)
    if np.any(lag < 0):
        raise ValidationError("lag k must be nonnegative")
    two_h = 2.0 * hh
    out = 0.5 * (np.abs(lag + 1) ** two_h + np.abs(lag - 1) ** two_h - 2.0 * lag**two_h)
    if np.isscalar(k):
        return float(out)
    return out


def circulant_eigenvalues(n_steps: int, h) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the unit-step fGn covariance.

    The covariance row (rho(0), ..., rho(n-1)) is mirrored to length
    M = 2(n-1): (rho_0, ..., rho_{n-1}, rho_{n-2}, ..., rho_1). The DFT of
    that row is the (real) eigenvalue vector. Requires n_steps >= 2.
    """
    n = int(n_steps)
    if n < 2:
        raise ValidationError("circulant embedding needs n_steps >= 2")
    rho = fgn_autocovariance(np.arange(n), h)
    row = np.concatenate([rho, rho[-2:0:-1]])
    lam = np.fft.fft(row).real
    return lam


def _fgn_from_normals(
    lam: np.ndarray, v0: float, vh: float, a: np.ndarray, b: np.ndarray, n: int
) -> np.ndarray:
    """Deterministic core of the sampler: map i.i.d. N(0,1) draws to fGn.

    lam are the M = 2(n-1) embedding eigenvalues (already clipped at 0);
    v0, vh feed the two self-conjugate Fourier modes, (a, b) the remaining
    M/2 - 1 conjugate pairs. Returns n unit-step fGn samples.
    """
    m = lam.shape[0]
    z = np.empty(m, dtype=np.complex128)
    z[0] = v0
    z[m // 2] = vh
    pair = (a + 1j * b) / np.sqrt(2.0)
    z[1 : m // 2] = pair
    z[m // 2 + 1 :] = np.conj(pair[::-1])
    x = np.fft.fft(np.sqrt(lam) * z).real / np.sqrt(m)
    return x[:n]


def generate_fgn(grid: SimGrid, h, seed: int, path_index: int = 0) -> np.ndarray:
    """Draw one exact fGn sample of length grid.n_steps.

    The joint law is N(0, Sigma) with Sigma_{jk} = dt^{2h} rho(|j-k|). The
    generator is Philox keyed by (seed, path_index): distinct paths use
    distinct keys, so a path's draw never depends on how work is scheduled.

    Raises NegativeEigenvalue if the circulant embedding is indefinite
    (does not occur for h in (1/2,1); the guard detects misuse or overflow).
    """
    hh = _hurst(h)
    n = grid.n_steps
    if n < 1:
        raise ValidationError("generate_fgn needs n_steps >= 1")
    rng = np.random.Generator(
        np.random.Philox(key=[int(seed) & _MASK64, int(path_index) & _MASK64])
    )
    scale = grid.dt**hh
    if n == 1:
        return np.array([scale * rng.standard_normal()])
    lam = circulant_eigenvalues(n, hh)
    lam_max = lam.max()
    if lam.min() < -1e-10 * lam_max:
        raise NegativeEigenvalue(
            f"circulant embedding indefinite: min eigenvalue {lam.min():.3e} "
            f"vs max {lam_max:.3e} (n_steps={n}, h={hh})"
        )
    lam = np.maximum(lam, 0.0)
    v0 = rng.standard_normal()
    vh = rng.standard_normal()
    a = rng.standard_normal(n - 2)
    b = rng.standard_normal(n - 2)
    return scale * _fgn_from_normals(lam, v0, vh, a, b, n)


def fbm_from_fgn(increments: np.ndarray, dt: float = 1.0) -> GaussianPath:
    """Cumulative-sum an increment array into an fBm path starting at 0."""
    increments = np.asarray(increments, dtype=np.float64)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    grid = SimGrid(dt=dt, n_steps=increments.shape[0])
    return GaussianPath(grid=grid, values=values)


def write_path_csv(path: GaussianPath, dest) -> None:
    """Write a path as CSV with header ``t,value`` at full %.17g precision.

    dest is a filesystem path or an open text file.
    """
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", encoding="utf-8") as fh:
            write_path_csv(path, fh)
        return
    fh: io.TextIOBase = dest
    fh.write("t,value\n")
    for t, v in zip(path.grid.times, path.values):
        fh.write(f"{t:.17g},{v:.17g}\n")
