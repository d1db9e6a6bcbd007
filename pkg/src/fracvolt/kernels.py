"""Volterra kernel catalog with decay metadata and admissibility checks.

A kernel is a deterministic function x: [0, inf) -> R. Analytic variants
are finite sums of decaying exponentials. Tabulated variants are piecewise
linear on a uniform grid and identically zero beyond it; the user-supplied
tail envelope bounds whatever true tail was cut off, and the quadrature
routines charge that envelope to their truncation budget rather than
inventing values outside the table.

Admissibility bundles the integrability conditions the limit theorems
assume: square-type integrability of the kernel against the two-point
weight, the power-integrability condition tied to the Hermite rank, strict
positivity of the stationary variance, and the weighted variant with the
((u ^ v) v 1) factor required for functional convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    EnvelopeViolation,
    InadmissibleParams,
    NegativeTime,
    ValidationError,
)

__all__ = [
    "DecayEnvelope",
    "Exponential",
    "Car2First",
    "Car2Second",
    "Tabulated",
    "KernelSpec",
    "AffinePiece",
    "ExpPiece",
    "AdmissibilityReport",
    "eval_kernel",
    "expsum_terms",
    "kernel_pieces",
    "car2_roots",
    "check_admissibility",
    "kernel_to_dict",
    "kernel_from_dict",
]


@dataclass(frozen=True)
class DecayEnvelope:
    """Exponential tail bound |x(t)| <= c * exp(-lam * t).

    For analytic kernels the bound holds for all t >= 0 by construction.
    For Tabulated kernels it is a claim about the discarded tail beyond the
    table only; c = 0 asserts compact support.
    """

    c: float
    lam: float

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValidationError(f"envelope amplitude c must be >= 0, got {self.c}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValidationError(f"envelope rate must be > 0, got {self.lam}")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "lam", float(self.lam))

    def value(self, t):
        return self.c * np.exp(-self.lam * np.asarray(t, dtype=np.float64))

    def tail_mass(self, s: float) -> float:
        """Upper bound on integral of c*exp(-lam*u) over u >= s."""
        return self.c * math.exp(-self.lam * s) / self.lam


def _validate_car2_pair(p: float, q: float) -> None:
    if not (p < 0 and q < 0):
        raise ValidationError(f"characteristic roots must be negative, got p={p}, q={q}")
    if p == q:
        raise ValidationError("repeated root p == q not supported")


@dataclass(frozen=True)
class Exponential:
    """x(t) = sigma * exp(-theta t); the fractional OU kernel."""

    sigma: float
    theta: float
    decay_envelope: DecayEnvelope = None

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if not (self.theta > 0):
            raise ValidationError(f"theta must be > 0, got {self.theta}")
        if self.decay_envelope is None:
            object.__setattr__(self, "decay_envelope", DecayEnvelope(self.sigma, self.theta))


@dataclass(frozen=True)
class Car2First:
    """x(t) = (e^{pt} - e^{qt})/(p - q); level kernel of the order-2 model."""

    p: float
    q: float
    decay_envelope: DecayEnvelope = None

    def __post_init__(self):
        _validate_car2_pair(self.p, self.q)
        if self.decay_envelope is None:
            env = DecayEnvelope(2.0 / abs(self.p - self.q), -max(self.p, self.q))
            object.__setattr__(self, "decay_envelope", env)


@dataclass(frozen=True)
class Car2Second:
    """x(t) = (p e^{pt} - q e^{qt})/(p - q); derivative kernel, x2 = x1'."""

    p: float
    q: float
    decay_envelope: DecayEnvelope = None

    def __post_init__(self):
        _validate_car2_pair(self.p, self.q)
        if self.decay_envelope is None:
            c = (abs(self.p) + abs(self.q)) / abs(self.p - self.q)
            env = DecayEnvelope(c, -max(self.p, self.q))
            object.__setattr__(self, "decay_envelope", env)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear kernel on the uniform grid 0, dt, ..., (n-1)dt.

    Evaluation is zero beyond the table. tail_envelope bounds the true
    kernel beyond the table end so integral routines can certify what the
    zero extension may have dropped.
    """

    samples: np.ndarray
    dt: float
    tail_envelope: DecayEnvelope

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.shape[0] < 2:
            raise ValidationError("tabulated kernel needs a 1-d array of >= 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("tabulated samples must be finite")
        if not (self.dt > 0):
            raise ValidationError(f"table step dt must be > 0, got {self.dt}")
        if not isinstance(self.tail_envelope, DecayEnvelope):
            raise ValidationError("tabulated kernel requires an explicit tail_envelope")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def t_end(self) -> float:
        return (self.samples.shape[0] - 1) * self.dt


KernelSpec = Union[Exponential, Car2First, Car2Second, Tabulated]


def expsum_terms(spec: KernelSpec):
    """(amplitudes, rates) of an exponential-sum kernel, or None for tables."""
    if isinstance(spec, Exponential):
        return np.array([spec.sigma]), np.array([-spec.theta])
    if isinstance(spec, Car2First):
        d = spec.p - spec.q
        return np.array([1.0 / d, -1.0 / d]), np.array([spec.p, spec.q])
    if isinstance(spec, Car2Second):
        d = spec.p - spec.q
        return np.array([spec.p / d, -spec.q / d]), np.array([spec.p, spec.q])
    return None


def eval_kernel(spec: KernelSpec, t):
    """Evaluate x(t) for t >= 0 (scalar or array). Raises NegativeTime."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise NegativeTime("kernels are defined on t >= 0")
    terms = expsum_terms(spec)
    if terms is not None:
        amps, rates = terms
        out = np.exp(np.multiply.outer(t_arr, rates)) @ amps
    else:
        grid = np.arange(spec.samples.shape[0]) * spec.dt
        out = np.interp(t_arr, grid, spec.samples, right=0.0)
        out = np.where(t_arr > spec.t_end, 0.0, out)
    if np.isscalar(t) or (isinstance(t, np.ndarray) and t.ndim == 0):
        return float(out)
    return out


def car2_roots(theta0: float, theta1: float):
    """Roots (p, q), p > q, of z^2 - theta1 z - theta0 = 0.

    Admissible parameters have theta0 < 0, theta1 < 0 and positive
    discriminant theta1^2 + 4 theta0, which puts both roots strictly in the
    left half line and keeps them distinct.
    """
    if not (math.isfinite(theta0) and math.isfinite(theta1)):
        raise InadmissibleParams("theta must be finite")
    if not (theta0 < 0 and theta1 < 0):
        raise InadmissibleParams(
            f"need theta0 < 0 and theta1 < 0, got theta0={theta0}, theta1={theta1}"
        )
    disc = theta1 * theta1 + 4.0 * theta0
    if disc <= 0:
        raise InadmissibleParams(
            f"discriminant theta1^2 + 4 theta0 = {disc} is not positive "
            "(complex or repeated characteristic roots)"
        )
    root = math.sqrt(disc)
    p = 0.5 * (theta1 + root)
    q = 0.5 * (theta1 - root)
    return p, q


# ---------------------------------------------------------------------------
# piecewise decomposition used by the quadrature module
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffinePiece:
    """value(u) = slope*u + intercept on [lo, hi]."""

    lo: float
    hi: float
    slope: float
    intercept: float


@dataclass(frozen=True)
class ExpPiece:
    """value(u) = sum_m amps[m] * exp(rates[m]*u) on [lo, hi]; hi may be inf."""

    lo: float
    hi: float
    amps: tuple
    rates: tuple


def _expsum_sign_root(amps, rates):
    """Unique root in (0, inf) of a <=2-term exponential sum, or None."""
    nz = [(a, r) for a, r in zip(amps, rates) if a != 0.0]
    if len(nz) < 2:
        return None
    (a1, r1), (a2, r2) = nz
    ratio = -a1 / a2
    if ratio <= 0 or r1 == r2:
        return None
    t_star = math.log(ratio) / (r2 - r1)
    if t_star <= 0 or not math.isfinite(t_star):
        return None
    return t_star


def kernel_pieces(spec: KernelSpec, absolute: bool = False):
    """Decompose a kernel (or its absolute value) into sign-pure pieces.

    Returns a list of AffinePiece/ExpPiece covering the support in order.
    With absolute=True every piece is nonnegative; exponential sums are
    split at their sign root (at most one for the admitted variants).
    """
    terms = expsum_terms(spec)
    if terms is not None:
        amps, rates = terms
        if not absolute:
            return [ExpPiece(0.0, math.inf, tuple(amps), tuple(rates))]
        root = _expsum_sign_root(amps, rates)
        if root is None:
            mid_sign = 1.0 if eval_kernel(spec, 1.0) >= 0 else -1.0
            return [ExpPiece(0.0, math.inf, tuple(mid_sign * amps), tuple(rates))]
        s_lo = 1.0 if eval_kernel(spec, 0.5 * root) >= 0 else -1.0
        return [
            ExpPiece(0.0, root, tuple(s_lo * amps), tuple(rates)),
            ExpPiece(root, math.inf, tuple(-s_lo * amps), tuple(rates)),
        ]

    pieces = []
    s = spec.samples
    dt = spec.dt
    for i in range(s.shape[0] - 1):
        lo = i * dt
        hi = lo + dt
        slope = (s[i + 1] - s[i]) / dt
        intercept = s[i] - slope * lo
        if not absolute or (s[i] >= 0 and s[i + 1] >= 0):
            pieces.append(AffinePiece(lo, hi, slope, intercept))
        elif s[i] <= 0 and s[i + 1] <= 0:
            pieces.append(AffinePiece(lo, hi, -slope, -intercept))
        else:
            cross = -intercept / slope
            sgn = 1.0 if s[i] >= 0 else -1.0
            pieces.append(AffinePiece(lo, cross, sgn * slope, sgn * intercept))
            pieces.append(AffinePiece(cross, hi, -sgn * slope, -sgn * intercept))
    return pieces


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the four integrability conditions for one kernel.

    Each flag is true only when the corresponding truncated integral
    converged within the requested tolerance and its truncation tail bound
    stayed below tolerance. Values and total error bounds are reported so
    callers can see margins, not just booleans.
    """

    condition_integrable: bool
    condition_breuer: bool
    eta_positive: bool
    condition_dol2: bool
    integrable_value: float
    integrable_error: float
    breuer_value: float
    breuer_error: float
    eta_sq_value: float
    eta_sq_error: float
    dol2_value: float
    dol2_error: float


def _check_envelope_by_sampling(spec: KernelSpec) -> None:
    terms = expsum_terms(spec)
    if terms is None:
        return
    env = spec.decay_envelope
    t = np.linspace(0.0, 40.0 / env.lam, 400)
    vals = np.abs(eval_kernel(spec, t))
    bound = env.value(t)
    if np.any(vals > bound * (1.0 + 1e-12) + 1e-300):
        worst = float(np.max(vals - bound))
        raise EnvelopeViolation(
            f"sampled |x(t)| exceeds its decay envelope by up to {worst:.3e}"
        )


def check_admissibility(spec: KernelSpec, h, hermite_rank: int, tol: float) -> AdmissibilityReport:
    """Evaluate the four integrability conditions by certified quadrature.

    hermite_rank is the rank q of the observable whose limit theorem is
    being invoked; it enters only through the power-integrability condition
    int_0^inf (int int |x(u)x(v)| |v-u-a|^{2H-2} du dv)^q da, whose tail is
    integrable iff h < 1 - 1/(2q).
    """
    from . import quadrature as sq
    from .fgn import HurstParam

    if not (tol > 0):
        raise ValidationError(f"tol must be positive, got {tol}")
    rank = int(hermite_rank)
    if rank < 1:
        raise ValidationError(f"hermite_rank must be >= 1, got {hermite_rank}")
    hh = h.h if isinstance(h, HurstParam) else HurstParam(float(h)).h
    _check_envelope_by_sampling(spec)

    cfg = sq.QuadConfig(rel_tol=tol, abs_tol=tol, max_subdivisions=4000)

    res_abs = sq.double_weighted_integral(spec, spec, 0.0, hh, cfg, absolute=True)
    ok_a = res_abs.error_estimate + res_abs.truncation_bound <= cfg.tolerance_for(res_abs.value)

    res_eta = sq.double_weighted_integral(spec, spec, 0.0, hh, cfg)
    eta_sq = hh * (2.0 * hh - 1.0) * res_eta.value
    eta_err = hh * (2.0 * hh - 1.0) * (res_eta.error_estimate + res_eta.truncation_bound)
    ok_eta = eta_sq - eta_err > 0.0

    res_w = sq.double_weighted_integral(spec, spec, 0.0, hh, cfg, absolute=True, min1_weight=True)
    ok_d = res_w.error_estimate + res_w.truncation_bound <= cfg.tolerance_for(res_w.value)

    # power condition: the integrand is symmetric in a for a single kernel,
    # so the one-sided integral is half the full-line one
    if rank * (2.0 * hh - 2.0) >= -1.0:
        ok_b, val_b, err_b = False, math.inf, math.inf
    else:
        corr = sq.cross_correlation(spec, spec, absolute=True)
        cache = {}

        def rho_abs(a: float) -> float:
            return sq.weighted_line_integral(corr, a, hh, cfg, cache=cache).value

        tail = sq.PowerTail.for_correlation(corr, hh, rank)
        try:
            res_b = sq.line_integral_power(rho_abs, rank, cfg, tail)
            val_b = 0.5 * res_b.value
            err_b = 0.5 * (res_b.error_estimate + res_b.truncation_bound)
            ok_b = res_b.error_estimate + res_b.truncation_bound <= cfg.tolerance_for(res_b.value)
        except sq.ToleranceNotMet:
            ok_b, val_b, err_b = False, math.nan, math.inf

    return AdmissibilityReport(
        condition_integrable=bool(ok_a),
        condition_breuer=bool(ok_b),
        eta_positive=bool(ok_eta),
        condition_dol2=bool(ok_d),
        integrable_value=res_abs.value,
        integrable_error=res_abs.error_estimate + res_abs.truncation_bound,
        breuer_value=val_b,
        breuer_error=err_b,
        eta_sq_value=eta_sq,
        eta_sq_error=eta_err,
        dol2_value=res_w.value,
        dol2_error=res_w.error_estimate + res_w.truncation_bound,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def kernel_to_dict(spec: KernelSpec) -> dict:
    """JSON/TOML-ready mapping {variant, params, envelope}."""
    if isinstance(spec, Exponential):
        variant, params = "exponential", {"sigma": spec.sigma, "theta": spec.theta}
        env = spec.decay_envelope
    elif isinstance(spec, Car2First):
        variant, params = "car2_first", {"p": spec.p, "q": spec.q}
        env = spec.decay_envelope
    elif isinstance(spec, Car2Second):
        variant, params = "car2_second", {"p": spec.p, "q": spec.q}
        env = spec.decay_envelope
    elif isinstance(spec, Tabulated):
        variant = "tabulated"
        params = {"samples": [float(v) for v in spec.samples], "dt": spec.dt}
        env = spec.tail_envelope
    else:
        raise ValidationError(f"unknown kernel spec {spec!r}")
    return {"variant": variant, "params": params, "envelope": {"c": env.c, "lambda": env.lam}}


def kernel_from_dict(data: dict) -> KernelSpec:
    """Inverse of kernel_to_dict."""
    try:
        variant = data["variant"]
        params = data["params"]
        env_data = data.get("envelope")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed kernel mapping: {data!r}") from exc
    env = None
    if env_data is not None:
        env = DecayEnvelope(env_data["c"], env_data["lambda"])
    if variant == "exponential":
        return Exponential(params["sigma"], params["theta"], decay_envelope=env)
    if variant == "car2_first":
        return Car2First(params["p"], params["q"], decay_envelope=env)
    if variant == "car2_second":
        return Car2Second(params["p"], params["q"], decay_envelope=env)
    if variant == "tabulated":
        if env is None:
            raise ValidationError("tabulated kernel mapping must carry an envelope")
        return Tabulated(np.asarray(params["samples"], dtype=np.float64), params["dt"], env)
    raise ValidationError(f"unknown kernel variant {variant!r}")
