"""Second-order theory for the fractional CAR(2) model, in closed form.

The model is the second-order SDE  Xdotdot = theta0 X + theta1 Xdot + noise
with theta0, theta1 < 0 and theta1^2 + 4 theta0 > 0, driven by fractional
noise with Hurst index h in (1/2, 3/4). Its two state components are
Volterra processes with kernels Car2First / Car2Second, whose Fourier
transforms are rational:

    |Fx1(xi)|^2 = 1 / ((p^2+xi^2)(q^2+xi^2)),
    |Fx2(xi)|^2 = xi^2 / ((p^2+xi^2)(q^2+xi^2)),

with p > q the characteristic roots. This module computes the stationary
second moments m_inf = (eta1^2, eta2^2), the limit covariance Lambda of the
normalized moment errors sqrt(T)(m_hat - m_inf), and a method-of-moments
estimator for (theta0, theta1) with delta-method confidence intervals.

Route policy: every reported number comes from a quadrature-validated
route (frequency-domain integrals cross-checked elsewhere against the
time-domain double integrals). A set of candidate rational expressions for
the same quantities is evaluated verbatim alongside; entries where a
candidate disagrees with the validated route are flagged with provenance
"oracle_quadrature" and a discrepancy note, instead of silently trusting
either side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import (
    InadmissibleParams,
    NoSolution,
    OutOfRange,
    SingularJacobian,
    ValidationError,
)
from .fgn import _hurst
from .kernels import car2_roots

__all__ = [
    "Car2Params",
    "SpectralConstants",
    "ClosedFormReport",
    "spectral_constants",
    "m_infinity",
    "lambda_closed_form",
    "estimate_theta",
    "delta_method_cov",
    "moment_jacobian",
    "confidence_intervals",
    "empirical_moments",
    "Z_99",
]

# two-sided 99% normal quantile
Z_99 = 2.5758293035489004

# relative disagreement beyond which a candidate rational form is reported
# as discrepant rather than used as provenance
_CANDIDATE_TOL = 1e-6


@dataclass(frozen=True)
class Car2Params:
    """Admissible drift parameters with their characteristic roots.

    Requires theta0 < 0, theta1 < 0 and theta1^2 + 4 theta0 > 0, so the
    roots p > q of z^2 - theta1 z - theta0 are real, distinct and negative.
    """

    theta0: float
    theta1: float
    p: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        p, q = car2_roots(float(self.theta0), float(self.theta1))
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "theta1", float(self.theta1))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class SpectralConstants:
    """Hurst-dependent constants of the frequency-domain representation.

    kappa:   Fourier constant of |t|^{2h-2} (with the 1/(2 pi) convention)
    d_h:     kappa * h(2h-1)
    e_h:     2 d_h * int_0^inf xi^{1-2h}/(1+xi^2) dxi
    k_h:     constant in int |u+a|^{2h-2}|v+a|^{2h-2} da = k_h |u-v|^{4h-3}
    a_h:     k_h * 2 h^2 (2h-1)^2 * kappa', kappa' the constant of |t|^{4h-3}
    alpha_h: 2 a_h * int_0^inf xi^{2-4h}/(1+xi^2)^2 dxi
    beta_h:  2 a_h * int_0^inf xi^{2-4h}/(1+xi^2) dxi
    """

    kappa: float
    d_h: float
    e_h: float
    k_h: float
    a_h: float
    alpha_h: float
    beta_h: float

    def __post_init__(self):
        for name in ("kappa", "d_h", "e_h", "k_h", "a_h", "alpha_h", "beta_h"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"spectral constant {name} = {v} must be finite and positive")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class ClosedFormReport:
    """m_inf and Lambda entries with per-entry provenance.

    provenance[entry] is "closed_form" when the candidate rational form
    agrees with the quadrature-validated route, "oracle_quadrature" when it
    does not (the validated value is reported either way); notes[entry]
    carries the observed disagreement.
    """

    eta1_sq: float
    eta2_sq: float
    lambda_11: float
    lambda_12: float
    lambda_22: float
    provenance: dict
    notes: dict

    def __post_init__(self):
        if not (self.eta1_sq > 0 and self.eta2_sq > 0):
            raise ValidationError(
                f"stationary moments must be positive, got ({self.eta1_sq}, {self.eta2_sq})"
            )
        lam = self.lambda_matrix()
        eig = np.linalg.eigvalsh(lam)
        if eig.min() < -1e-12 * max(np.trace(lam), 1e-300):
            raise ValidationError(f"Lambda not PSD: eigenvalues {eig}")
        allowed = {"closed_form", "oracle_quadrature"}
        keys = {"eta1_sq", "eta2_sq", "lambda_11", "lambda_12", "lambda_22"}
        if set(self.provenance) != keys or not set(self.provenance.values()) <= allowed:
            raise ValidationError("provenance must flag exactly the five report entries")

    def lambda_matrix(self) -> np.ndarray:
        return np.array([[self.lambda_11, self.lambda_12],
                         [self.lambda_12, self.lambda_22]])

    def m_inf(self) -> np.ndarray:
        return np.array([self.eta1_sq, self.eta2_sq])


def _quad(f, lo, hi, weight=None, wvar=None) -> float:
    val, _ = quad(f, lo, hi, weight=weight, wvar=wvar,
                  epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


@lru_cache(maxsize=64)
def _constants_cached(hh: float) -> SpectralConstants:
    kappa = math.sin(math.pi * hh) * math.gamma(2.0 * hh - 1.0) / math.pi
    d_h = kappa * hh * (2.0 * hh - 1.0)

    # e_h: grade the xi^{1-2h} endpoint singularity on [0,1], map the tail
    # to [0,1] by xi -> 1/s (integrand becomes s^{2h-1}/(1+s^2), smooth)
    e_head = _quad(lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0,
                   weight="alg", wvar=(1.0 - 2.0 * hh, 0.0))
    e_tail = _quad(lambda s: s ** (2.0 * hh - 1.0) / (1.0 + s * s), 0.0, 1.0)
    e_h = 2.0 * d_h * (e_head + e_tail)

    k_h = _k_h_integral(hh, 1.0)

    kappa_p = math.sin(math.pi * (3.0 - 4.0 * hh) / 2.0) * math.gamma(4.0 * hh - 2.0) / math.pi
    a_h = k_h * 2.0 * hh * hh * (2.0 * hh - 1.0) ** 2 * kappa_p

    # alpha_h, beta_h: same head/tail split with weight xi^{2-4h}
    w = 2.0 - 4.0 * hh
    b_head = _quad(lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, weight="alg", wvar=(w, 0.0))
    b_tail = _quad(lambda s: s ** (4.0 * hh - 2.0) / (1.0 + s * s), 0.0, 1.0)
    beta_h = 2.0 * a_h * (b_head + b_tail)
    a_head = _quad(lambda x: 1.0 / (1.0 + x * x) ** 2, 0.0, 1.0, weight="alg", wvar=(w, 0.0))
    a_tail = _quad(lambda s: s ** (4.0 * hh) / (1.0 + s * s) ** 2, 0.0, 1.0)
    alpha_h = 2.0 * a_h * (a_head + a_tail)

    return SpectralConstants(kappa=kappa, d_h=d_h, e_h=e_h, k_h=k_h,
                             a_h=a_h, alpha_h=alpha_h, beta_h=beta_h)


def _k_h_integral(hh: float, v: float) -> float:
    """int_R |a|^{2h-2} |v+a|^{2h-2} da / v^{4h-3}, evaluated numerically.

    The integrand is symmetric about a = -v/2, so twice the integral over
    (-v/2, inf) suffices; that range splits into [-v/2, 0] and [0, v] with
    one algebraic endpoint singularity each, plus a tail mapped to a
    bounded interval by a -> 1/s.
    """
    g = 2.0 * hh - 2.0
    i1 = _quad(lambda a: abs(v + a) ** g, -0.5 * v, 0.0,
               weight="alg", wvar=(0.0, g))
    i2 = _quad(lambda a: (v + a) ** g, 0.0, v, weight="alg", wvar=(g, 0.0))
    i3 = _quad(lambda s: (1.0 + v * s) ** g, 0.0, 1.0 / v,
               weight="alg", wvar=(2.0 - 4.0 * hh, 0.0))
    return 2.0 * (i1 + i2 + i3) / v ** (4.0 * hh - 3.0)


def spectral_constants(h) -> SpectralConstants:
    """All Hurst-dependent constants, for h in (1/2, 3/4).

    kappa and kappa' come from the classical Fourier identity
    FT[|t|^{-alpha}](xi) = 2 sin(pi alpha/2) Gamma(1-alpha) |xi|^{alpha-1}
    divided by 2 pi; the xi-integrals and k_h are evaluated numerically with
    endpoint-singularity grading. Identities such as e_h = d_h pi / sin(pi h)
    are asserted in the test suite, not assumed here.
    """
    hh = _hurst(h)
    if hh >= 0.75:
        raise OutOfRange(
            f"spectral constants need h in (1/2, 3/4): |t|^{{4h-3}} is not "
            f"locally integrable-decaying for h = {hh}"
        )
    return _constants_cached(hh)


def m_infinity(params: Car2Params, h) -> tuple:
    """Stationary second moments (eta1^2, eta2^2) of the two components.

    eta1^2 = e_h (|p|^{-2h} - |q|^{-2h}) / (q^2 - p^2)
    eta2^2 = e_h (|q|^{2-2h} - |p|^{2-2h}) / (q^2 - p^2)

    These partial-fraction forms follow from |Fx_i|^2 above; they agree with
    the time-domain double integrals to quadrature precision (asserted in
    tests), unlike the candidate squared-difference forms, which
    lambda_closed_form reports on.
    """
    hh = _hurst(h)
    c = spectral_constants(hh)
    p, q = params.p, params.q
    denom = q * q - p * p
    eta1_sq = c.e_h * (abs(p) ** (-2.0 * hh) - abs(q) ** (-2.0 * hh)) / denom
    eta2_sq = c.e_h * (abs(q) ** (2.0 - 2.0 * hh) - abs(p) ** (2.0 - 2.0 * hh)) / denom
    return eta1_sq, eta2_sq


def _lambda_entry(p: float, q: float, hh: float, a_h: float, m: int) -> float:
    """a_h int_R |xi|^{2-4h} xi^{2m} / ((p^2+xi^2)(q^2+xi^2))^2 dxi.

    m = i+j-2 counts the xi^2 numerator factors of |Fx_i|^2 |Fx_j|^2.
    Head [0,1] carries the algebraic weight; the tail maps to [0,1] by
    xi -> 1/s with smooth integrand s^{4h+4-2m} / ((p^2 s^2+1)(q^2 s^2+1))^2.
    """
    P, Q = p * p, q * q
    head = _quad(lambda x: x ** (2 * m) / ((P + x * x) * (Q + x * x)) ** 2,
                 0.0, 1.0, weight="alg", wvar=(2.0 - 4.0 * hh, 0.0))
    tail = _quad(lambda s: s ** (4.0 * hh + 4.0 - 2.0 * m)
                 / ((P * s * s + 1.0) * (Q * s * s + 1.0)) ** 2, 0.0, 1.0)
    return 2.0 * a_h * (head + tail)


def _lambda_partial_fractions(p: float, q: float, hh: float,
                              alpha_h: float, beta_h: float) -> tuple:
    """Exact partial-fraction evaluation of the three Lambda entries.

    Uses a_h int_R |xi|^{2-4h}/(c^2+xi^2) dxi   = beta_h  |c|^{1-4h} and
         a_h int_R |xi|^{2-4h}/(c^2+xi^2)^2 dxi = alpha_h |c|^{-1-4h}
    after expanding ((P+x)(Q+x))^{-1} = (1/(P+x) - 1/(Q+x))/(Q-P), P = p^2,
    Q = q^2. Internal cross-check for _lambda_entry; tests pin agreement.
    """
    P, Q = p * p, q * q
    D = Q - P
    ap = abs(p) ** (-1.0 - 4.0 * hh)
    aq = abs(q) ** (-1.0 - 4.0 * hh)
    bp = abs(p) ** (1.0 - 4.0 * hh)
    bq = abs(q) ** (1.0 - 4.0 * hh)
    l11 = (alpha_h * (ap + aq) - (2.0 * beta_h / D) * (bp - bq)) / D ** 2
    A = (P + Q) / D ** 3
    l12 = (A * beta_h * bp - (P / D ** 2) * alpha_h * ap
           - A * beta_h * bq - (Q / D ** 2) * alpha_h * aq)
    A2 = -2.0 * P * Q / D ** 3
    l22 = (A2 * beta_h * bp + (P ** 2 / D ** 2) * alpha_h * ap
           - A2 * beta_h * bq + (Q ** 2 / D ** 2) * alpha_h * aq)
    return l11, l12, l22


def _candidate_m_infinity(p, q, hh, e_h):
    eta1 = e_h * (abs(p) ** (-hh) - abs(q) ** (-hh)) ** 2 / (p - q) ** 2
    eta2 = e_h * (abs(p) ** (1.0 - hh) - abs(q) ** (1.0 - hh)) ** 2 / (p - q) ** 2
    return eta1, eta2


def _candidate_lambda(p, q, hh, alpha_h, beta_h):
    """The candidate rational expressions for Lambda, coded verbatim."""
    h4 = 4.0 * hh
    pq = p * q
    bp = abs(p) ** (1.0 - h4)
    bq = abs(q) ** (1.0 - h4)
    bpq = pq ** (0.5 - 2.0 * hh)
    pre = 1.0 / (p - q) ** 4
    l11 = pre * (
        alpha_h * (abs(p) ** (-1.0 - h4) + abs(q) ** (-1.0 - h4)
                   + 4.0 * pq ** (-0.5 - 2.0 * hh))
        + beta_h * ((2.0 / (p * p - q * q)) * (bq - bp)
                    - (4.0 / (p * p - pq)) * (bpq - bp)
                    - (4.0 / (q * q - pq)) * (bpq - bq)))
    l12 = pre * (
        alpha_h * (bp + bq + 4.0 * bpq)
        + beta_h * (((p * p + q * q) / (p * p - q * q)) * (bq - bp)
                    - 2.0 * ((p * p + pq) / (p * p - pq)) * (bpq - bp)
                    - 2.0 * ((q * q + pq) / (q * q - pq)) * (bpq - bq)))
    l22 = pre * (
        alpha_h * (abs(p) ** (3.0 - h4) + abs(q) ** (-h4)
                   + 4.0 * pq ** (-1.5 - 2.0 * hh))
        + beta_h * (((2.0 * p * p * q * q) / (p * p - q * q)) * (bq - bp)
                    - (4.0 * p ** 3 * q / (p * p - pq)) * (bpq - bp)
                    - (4.0 * p * q ** 3 / (q * q - pq)) * (bpq - bq)))
    return l11, l12, l22


def lambda_closed_form(params: Car2Params, h) -> ClosedFormReport:
    """m_inf and Lambda for the CAR(2) model, with provenance per entry.

    The reported values come from the frequency-domain integrals (validated
    end to end against the general time-domain route; see tests). Candidate
    rational expressions for each entry are evaluated verbatim; any that
    disagree beyond 1e-6 relative are flagged oracle_quadrature with a note
    recording both values.
    """
    hh = _hurst(h)
    c = spectral_constants(hh)
    p, q = params.p, params.q

    eta1_sq, eta2_sq = m_infinity(params, hh)
    lam = {
        "lambda_11": _lambda_entry(p, q, hh, c.a_h, 0),
        "lambda_12": _lambda_entry(p, q, hh, c.a_h, 1),
        "lambda_22": _lambda_entry(p, q, hh, c.a_h, 2),
    }

    cand = {}
    cand["eta1_sq"], cand["eta2_sq"] = _candidate_m_infinity(p, q, hh, c.e_h)
    (cand["lambda_11"], cand["lambda_12"],
     cand["lambda_22"]) = _candidate_lambda(p, q, hh, c.alpha_h, c.beta_h)

    values = {"eta1_sq": eta1_sq, "eta2_sq": eta2_sq, **lam}
    provenance = {}
    notes = {}
    for key, val in values.items():
        rel = abs(cand[key] - val) / max(abs(val), 1e-300)
        if rel <= _CANDIDATE_TOL:
            provenance[key] = "closed_form"
        else:
            provenance[key] = "oracle_quadrature"
            notes[key] = (
                f"candidate rational form gives {cand[key]:.12g}, validated "
                f"route gives {val:.12g} (relative difference {rel:.3g}); "
                "the validated value is reported"
            )

    return ClosedFormReport(eta1_sq=eta1_sq, eta2_sq=eta2_sq,
                            lambda_11=lam["lambda_11"],
                            lambda_12=lam["lambda_12"],
                            lambda_22=lam["lambda_22"],
                            provenance=provenance, notes=notes)


# ---------------------------------------------------------------------------
# method-of-moments estimation
# ---------------------------------------------------------------------------

_DEFAULT_INIT = (-2.0, -3.0)  # roots (-1, -2)


def _params_from_log(z: np.ndarray) -> Car2Params:
    return Car2Params(theta0=-math.exp(z[0]), theta1=-math.exp(z[1]))


def estimate_theta(m_hat, h, init: Car2Params = None) -> Car2Params:
    """Solve m_infinity(theta, h) = m_hat for theta by damped Newton.

    Iterates in (log(-theta0), log(-theta1)) so sign constraints hold by
    construction; trial steps that violate the discriminant constraint are
    backtracked. Converges when both moment residuals are below 1e-10
    relative. Raises NoSolution when the target is outside the range of the
    moment map (e.g. any non-positive entry) or the iteration stalls.
    """
    hh = _hurst(h)
    m = np.asarray(m_hat, dtype=np.float64)
    if m.shape != (2,) or not np.all(np.isfinite(m)) or not np.all(m > 0):
        raise NoSolution(
            f"moment targets must be two positive finite numbers, got {m_hat}"
        )
    if init is None:
        init = Car2Params(*_DEFAULT_INIT)
    target = np.log(m)
    z = np.array([math.log(-init.theta0), math.log(-init.theta1)])

    def residual(zv):
        pars = _params_from_log(zv)
        e1, e2 = m_infinity(pars, hh)
        return np.log([e1, e2]) - target, pars

    r, pars = residual(z)
    for _ in range(80):
        if np.max(np.abs(r)) < 1e-10:
            return pars
        jac = np.empty((2, 2))
        for jcol in range(2):
            step = 1e-6 * max(1.0, abs(z[jcol]))
            for _shrink in range(8):
                zp = z.copy(); zp[jcol] += step
                zm = z.copy(); zm[jcol] -= step
                try:
                    rp, _ = residual(zp)
                    rm, _ = residual(zm)
                    break
                except InadmissibleParams:
                    step *= 0.25
            else:
                raise NoSolution("cannot differentiate the moment map near the iterate")
            jac[:, jcol] = (rp - rm) / (2.0 * step)
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise NoSolution("moment-map Jacobian is singular at the iterate")
        lam = 1.0
        r_norm = np.max(np.abs(r))
        while lam >= 1e-12:
            try:
                r_new, pars_new = residual(z + lam * delta)
            except InadmissibleParams:
                lam *= 0.5
                continue
            if np.all(np.isfinite(r_new)) and np.max(np.abs(r_new)) < r_norm:
                z = z + lam * delta
                r, pars = r_new, pars_new
                break
            lam *= 0.5
        else:
            raise NoSolution(
                f"moment matching stalled at relative residual {r_norm:.3e}; "
                f"target {m.tolist()} appears to be outside the moment map's range"
            )
    raise NoSolution("moment matching did not converge within 80 iterations")


def moment_jacobian(params: Car2Params, h, rel_step: float = 1e-5) -> np.ndarray:
    """J = d(eta1^2, eta2^2)/d(theta0, theta1) by central differences."""
    hh = _hurst(h)
    theta = np.array([params.theta0, params.theta1])
    jac = np.empty((2, 2))
    for jcol in range(2):
        step = rel_step * abs(theta[jcol])
        for _shrink in range(8):
            tp = theta.copy(); tp[jcol] += step
            tm = theta.copy(); tm[jcol] -= step
            try:
                mp = m_infinity(Car2Params(*tp), hh)
                mm = m_infinity(Car2Params(*tm), hh)
                break
            except InadmissibleParams:
                step *= 0.25
        else:
            raise SingularJacobian(
                f"cannot take central differences at theta = {theta.tolist()}: "
                "every perturbation leaves the admissible set"
            )
        jac[:, jcol] = (np.asarray(mp) - np.asarray(mm)) / (2.0 * step)
    return jac


def delta_method_cov(params: Car2Params, h, T: float) -> np.ndarray:
    """Asymptotic covariance of the moment estimator: J^{-1} Lambda J^{-T} / T."""
    if not (T > 0 and math.isfinite(T)):
        raise ValidationError(f"horizon T must be positive and finite, got {T}")
    hh = _hurst(h)
    jac = moment_jacobian(params, hh)
    if np.linalg.cond(jac) > 1e12:
        raise SingularJacobian(
            f"moment Jacobian at theta = ({params.theta0}, {params.theta1}) "
            f"is numerically singular (cond = {np.linalg.cond(jac):.3e})"
        )
    lam = lambda_closed_form(params, hh).lambda_matrix()
    try:
        half = np.linalg.solve(jac, lam)
        cov = np.linalg.solve(jac, half.T).T / T
    except np.linalg.LinAlgError:
        raise SingularJacobian("moment Jacobian is singular")
    return 0.5 * (cov + cov.T)


def confidence_intervals(params: Car2Params, cov: np.ndarray) -> np.ndarray:
    """Per-coordinate two-sided 99% intervals, rows (lo, hi) for theta0, theta1."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (2, 2) or np.any(np.diag(cov) < 0):
        raise ValidationError("covariance must be 2x2 with nonnegative diagonal")
    theta = np.array([params.theta0, params.theta1])
    hw = Z_99 * np.sqrt(np.diag(cov))
    return np.column_stack([theta - hw, theta + hw])


def empirical_moments(times, values) -> tuple:
    """Time-averaged squared components ((1/T) int X^2, (1/T) int Xdot^2).

    values holds the two state rows (X, Xdot) sampled on times; integration
    is by the trapezoid rule.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != 2 or v.shape[1] != t.shape[0]:
        raise ValidationError(
            f"need a 2 x len(times) value matrix, got {v.shape} vs {t.shape}"
        )
    if t.shape[0] < 2 or not np.all(np.diff(t) > 0):
        raise ValidationError("times must be strictly increasing with length >= 2")
    horizon = t[-1] - t[0]
    m1 = float(np.trapezoid(v[0] ** 2, t)) / horizon
    m2 = float(np.trapezoid(v[1] ** 2, t)) / horizon
    return m1, m2
