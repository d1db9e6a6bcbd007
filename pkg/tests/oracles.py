"""Independent reference implementations used only by the tests.

Everything here trades speed for transparency: dense Riemann lattices with
exact per-cell weight integrals, brute-force Toeplitz quadratic forms,
textbook recurrences. Nothing imports the quadrature or simulation paths
under test, so agreement between the two is evidence, not tautology.
"""
import math

import numpy as np
from scipy.linalg import toeplitz


# ---------------------------------------------------------------------------
# dense Riemann evaluation of int int f(u) g(v) |v-u-a|^{2h-2} du dv
# ---------------------------------------------------------------------------

def _b2(x, h):
    """Double antiderivative of |x|^{2h-2}: |x|^{2h} / (2h(2h-1))."""
    return np.abs(x) ** (2.0 * h) / (2.0 * h * (2.0 * h - 1.0))


def cell_pair_weights(n, du, a, h):
    """Exact integrals of |v-u-a|^{2h-2} over every du x du cell pair.

    Both axes use cells [i du, (i+1) du), i < n. The integral over cell
    pair (i, j) depends only on k = j - i; entry k + (n-1) of the returned
    vector holds it, k running -(n-1) .. n-1.
    """
    k = np.arange(-(n - 1), n, dtype=np.float64) * du - a
    return _b2(k + du, h) - 2.0 * _b2(k, h) + _b2(k - du, h)


def dense_double_integral(f, g, a, h, t_cut, n, absolute=False):
    """Midpoint lattice sum with the singular weight integrated exactly.

    f, g are vectorized callables on [0, t_cut]; the domain is truncated
    there, so t_cut must be far enough into the tails for the target
    accuracy. Smooth-factor midpoint sampling times exact weight cell
    integrals converges at O(du^2).
    """
    du = t_cut / n
    mids = (np.arange(n) + 0.5) * du
    fu = np.asarray(f(mids), dtype=np.float64)
    gv = np.asarray(g(mids), dtype=np.float64)
    if absolute:
        fu = np.abs(fu)
        gv = np.abs(gv)
    w = cell_pair_weights(n, du, a, h)
    # correlate(gv, fu)[m] = sum_i gv[m-(n-1)+i] fu[i]: offset k = m-(n-1)
    return float(np.correlate(gv, fu, mode="full") @ w)


def dense_double_integral_min1(f, g, a, h, t_cut, n, absolute=False):
    """Same lattice sum with the extra weight max(min(u, v), 1).

    The extra factor is sampled at cell midpoints; its kink lines (u = v
    and min = 1) only cover an O(du) fraction of cells, so the sum is
    still O(du^2). Costs O(n^2) memory, keep n moderate.
    """
    du = t_cut / n
    mids = (np.arange(n) + 0.5) * du
    fu = np.asarray(f(mids), dtype=np.float64)
    gv = np.asarray(g(mids), dtype=np.float64)
    if absolute:
        fu = np.abs(fu)
        gv = np.abs(gv)
    w = cell_pair_weights(n, du, a, h)
    idx = np.arange(n)
    wmat = w[idx[None, :] - idx[:, None] + n - 1]
    extra = np.maximum(np.minimum(mids[:, None], mids[None, :]), 1.0)
    return float(np.einsum("i,j,ij,ij->", fu, gv, extra, wmat))


# ---------------------------------------------------------------------------
# exact second moments of the discrete simulation scheme
# ---------------------------------------------------------------------------

def fgn_autocov_ref(lags, h):
    """Unit-step fGn autocovariance rho(k) = ((k+1)^{2h} + |k-1|^{2h} - 2k^{2h})/2."""
    k = np.asarray(lags, dtype=np.float64)
    two_h = 2.0 * h
    return 0.5 * (np.abs(k + 1) ** two_h + np.abs(k - 1) ** two_h - 2.0 * np.abs(k) ** two_h)


def scheme_variance(kernel, dt, h, m):
    """Exact Var X(t_m) of the midpoint scheme, by Toeplitz quadratic form.

    X(t_m) = sum_{j<m} x((m-j-1/2) dt) dB_j with stationary increments
    Cov(dB_j, dB_j') = dt^{2h} rho(|j-j'|), so the variance is an exact
    finite quadratic form, independent of how the library simulates.
    """
    c = kernel((m - np.arange(m) - 0.5) * dt)
    rho = toeplitz(fgn_autocov_ref(np.arange(m), h))
    return float(dt ** (2.0 * h) * c @ rho @ c)


def scheme_cross_covariance(kernel_a, kernel_b, dt, h, m):
    """Exact Cov(X_a(t_m), X_b(t_m)) of the midpoint scheme, same driving fGn."""
    lag = (m - np.arange(m) - 0.5) * dt
    ca = kernel_a(lag)
    cb = kernel_b(lag)
    rho = toeplitz(fgn_autocov_ref(np.arange(m), h))
    return float(dt ** (2.0 * h) * ca @ rho @ cb)


# ---------------------------------------------------------------------------
# probabilists' Hermite polynomials, explicit low orders
# ---------------------------------------------------------------------------

_HERMITE_EXPLICIT = (
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: x**2 - 1.0,
    lambda x: x**3 - 3.0 * x,
    lambda x: x**4 - 6.0 * x**2 + 3.0,
    lambda x: x**5 - 10.0 * x**3 + 15.0 * x,
    lambda x: x**6 - 15.0 * x**4 + 45.0 * x**2 - 15.0,
)


def hermite_explicit(l, x):
    """He_l for l <= 6 from the printed closed forms."""
    x = np.asarray(x, dtype=np.float64)
    return _HERMITE_EXPLICIT[l](x)


# ---------------------------------------------------------------------------
# spectral constants at 40 decimal digits
# ---------------------------------------------------------------------------

def mp_spectral_constants(h):
    """The seven CAR(2)-limit constants from their defining formulas, mpmath.

    Returns a dict of floats correctly rounded from 40-digit arithmetic.
    """
    import mpmath as mp

    with mp.workdps(40):
        hh = mp.mpf(repr(float(h)))
        kappa = mp.sin(mp.pi * hh) * mp.gamma(2 * hh - 1) / mp.pi
        d_h = kappa * hh * (2 * hh - 1)
        e_h = hh * mp.gamma(2 * hh)
        k_h = mp.beta(2 * hh - 1, 2 * hh - 1) + 2 * mp.beta(2 * hh - 1, 3 - 4 * hh)
        s = 3 - 4 * hh
        kappa_s = mp.sin(mp.pi * s / 2) * mp.gamma(4 * hh - 2) / mp.pi
        a_h = k_h * 2 * hh**2 * (2 * hh - 1) ** 2 * kappa_s
        alpha_h = a_h * mp.gamma(s / 2) * mp.gamma(1 - s / 2 + 1)
        beta_h = a_h * mp.pi / mp.sin(mp.pi * s / 2)
        out = dict(kappa=kappa, d_h=d_h, e_h=e_h, k_h=k_h, a_h=a_h,
                   alpha_h=alpha_h, beta_h=beta_h)
        return {k: float(v) for k, v in out.items()}


def exponential_self_integral(sigma, theta, h):
    """rho_bar(0) for x(t) = sigma e^{-theta t}: sigma^2 theta^{-2h} Gamma(2h) / (2h-1)."""
    return sigma**2 * theta ** (-2.0 * h) * math.gamma(2.0 * h) / (2.0 * h - 1.0)


def car2_m_infinity_ref(theta0, theta1, h):
    """Stationary moments (E X^2, E Xdot^2) from the closed forms.

    Roots p > q of z^2 - theta1 z - theta0; e_h = h Gamma(2h).
    """
    disc = math.sqrt(theta1 * theta1 + 4.0 * theta0)
    p = 0.5 * (theta1 + disc)
    q = 0.5 * (theta1 - disc)
    e_h = h * math.gamma(2.0 * h)
    denom = q * q - p * p
    eta1 = e_h * (abs(p) ** (-2.0 * h) - abs(q) ** (-2.0 * h)) / denom
    eta2 = e_h * (abs(q) ** (2.0 - 2.0 * h) - abs(p) ** (2.0 - 2.0 * h)) / denom
    return eta1, eta2


# ---------------------------------------------------------------------------
# small statistics helpers
# ---------------------------------------------------------------------------

def jackknife_se_ref(samples):
    """Leave-one-out SE of every covariance entry, direct and quadratic."""
    s = np.asarray(samples, dtype=np.float64)
    n, k = s.shape
    loo = np.empty((n, k, k))
    idx = np.arange(n)
    for drop in range(n):
        sub = s[idx != drop]
        loo[drop] = np.cov(sub, rowvar=False, ddof=1).reshape(k, k)
    mean = loo.mean(axis=0)
    return np.sqrt((n - 1) / n * ((loo - mean) ** 2).sum(axis=0))
