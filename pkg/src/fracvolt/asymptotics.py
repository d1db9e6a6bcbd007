"""Limit covariance of time-averaged functionals of fractional Volterra processes.

For kernels x_i and centered Hermite expansions f_i = sum_l a_{i,l} He_l, the
normalized time averages of f_i(X_i(t)/eta_i) converge jointly to N_k(0, L)
with

    L_ij = sum_{l >= q_i v q_j} a_{i,l} a_{j,l} l! (H(2H-1))^l / (eta_i eta_j)^l
           * int_R rbar_ij(a)^l da,
    rbar_ij(a) = int_{[0,inf)^2} x_i(u) x_j(v) |v-u-a|^{2H-2} du dv,
    eta_i^2 = H(2H-1) rbar_ii(0).

The theorem hypotheses are enforced hard: every rank must be >= 2 and the
Hurst index must satisfy h < 1 - 1/(2 q_*). Numbers computed outside that
region would not be covered by any limit theorem, so they are refused rather
than warned about.

All integrals run through the certified quadrature module; each matrix entry
carries the accumulated error estimate + truncation bound, plus (for
numerically truncated expansions) a reported bound on the discarded series
tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature as sq
from .errors import DegenerateKernel, ValidationError
from .fgn import HurstParam
from .hermite import HermiteExpansion
from .kernels import KernelSpec

__all__ = [
    "ModelSpec",
    "EtaVector",
    "LambdaMatrix",
    "validate_hypotheses",
    "eta",
    "rho_bar",
    "sigma_t",
    "lambda_matrix",
]

_DEFAULT_TOL = 1e-7


def _config(tol: float) -> sq.QuadConfig:
    if not (tol > 0):
        raise ValidationError(f"tol must be positive, got {tol}")
    return sq.QuadConfig(rel_tol=tol, abs_tol=tol, max_subdivisions=4000)


@dataclass(frozen=True)
class ModelSpec:
    """k kernels, k centered expansions, one Hurst index.

    Construction checks shape only. Theorem-scope checks (ranks, Hurst
    range) live in validate_hypotheses: rank-1 models must remain
    constructible so diagnostic runs can be made outside theorem scope,
    explicitly flagged as such.
    """

    kernels: tuple
    expansions: tuple
    h: HurstParam

    def __post_init__(self):
        kernels = tuple(self.kernels)
        expansions = tuple(self.expansions)
        if len(kernels) < 1:
            raise ValidationError("model needs at least one component")
        if len(kernels) != len(expansions):
            raise ValidationError(
                f"{len(kernels)} kernels vs {len(expansions)} expansions"
            )
        for e in expansions:
            if not isinstance(e, HermiteExpansion):
                raise ValidationError(f"not a Hermite expansion: {e!r}")
        h = self.h if isinstance(self.h, HurstParam) else HurstParam(float(self.h))
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "expansions", expansions)
        object.__setattr__(self, "h", h)

    @property
    def k(self) -> int:
        return len(self.kernels)

    @property
    def q_star(self) -> int:
        return min(e.rank for e in self.expansions)


def validate_hypotheses(model: ModelSpec) -> None:
    """Hard check of the limit-theorem hypotheses on ranks and Hurst range."""
    q_star = model.q_star
    if q_star < 2:
        ranks = [e.rank for e in model.expansions]
        raise ValidationError(
            f"Hermite-rank hypothesis violated: q_* = min(ranks) = {q_star} "
            f"(ranks {ranks}); the multivariate CLT requires rank >= 2 for "
            "every component"
        )
    h_max = 1.0 - 1.0 / (2.0 * q_star)
    if model.h.h >= h_max:
        raise ValidationError(
            f"Hurst-range hypothesis violated: h = {model.h.h} is not in "
            f"(1/2, 1 - 1/(2 q_*)) = (0.5, {h_max}) for q_* = {q_star}"
        )


@dataclass(frozen=True)
class EtaVector:
    """Stationary limit scales eta_i > 0 with certified error bounds."""

    eta: np.ndarray
    error_bounds: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64)
        err = np.asarray(self.error_bounds, dtype=np.float64)
        if eta.ndim != 1 or eta.shape != err.shape:
            raise ValidationError("eta and error_bounds must be equal-length vectors")
        if not np.all(eta > 0):
            raise DegenerateKernel("every eta_i must be strictly positive")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "error_bounds", err)


@dataclass(frozen=True)
class LambdaMatrix:
    """Symmetric PSD limit covariance with per-entry error bounds."""

    entries: np.ndarray
    error_bounds: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        b = np.asarray(self.error_bounds, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape != b.shape:
            raise ValidationError("covariance must be square with matching bounds")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValidationError("covariance must be symmetric")
        eig = np.linalg.eigvalsh(0.5 * (m + m.T))
        if eig.min() < -1e-10 * max(np.trace(m), 1e-300):
            raise ValidationError(
                f"covariance not PSD: min eigenvalue {eig.min():.3e}"
            )
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "error_bounds", b)


def eta(model: ModelSpec, tol: float = _DEFAULT_TOL) -> EtaVector:
    """eta_i = sqrt(H(2H-1) rbar_ii(0)), certified strictly positive."""
    cfg = _config(tol)
    hh = model.h.h
    hfac = hh * (2.0 * hh - 1.0)
    vals = []
    errs = []
    for spec in model.kernels:
        res = sq.double_weighted_integral(spec, spec, 0.0, hh, cfg)
        eta_sq = hfac * res.value
        eta_sq_err = hfac * (res.error_estimate + res.truncation_bound)
        if eta_sq - eta_sq_err <= 0.0:
            raise DegenerateKernel(
                f"eta^2 = {eta_sq:.3e} +- {eta_sq_err:.3e} is not certifiably "
                "positive; the limit theorems require eta_i > 0"
            )
        e = math.sqrt(eta_sq)
        vals.append(e)
        errs.append(eta_sq_err / (2.0 * e))
    return EtaVector(eta=np.array(vals), error_bounds=np.array(errs))


def rho_bar(model: ModelSpec, i: int, j: int, a: float,
            tol: float = _DEFAULT_TOL) -> float:
    """Inner double integral rbar_ij(a), without the H(2H-1) factor."""
    k = model.k
    if not (0 <= i < k and 0 <= j < k):
        raise ValidationError(f"component indices ({i}, {j}) out of range for k={k}")
    cfg = _config(tol)
    res = sq.double_weighted_integral(model.kernels[i], model.kernels[j],
                                      float(a), model.h.h, cfg)
    return res.value


def sigma_t(model: ModelSpec, i: int, t: float, tol: float = _DEFAULT_TOL) -> float:
    """sigma_i(t) = sqrt(H(2H-1) int_{[0,t]^2} x_i x_i |v-u|^{2H-2}).

    The kernel is restricted to [0, t] exactly (the integrand vanishes
    outside), so the value inherits the quadrature certificates; no
    truncation heuristics are involved.
    """
    if not (0 <= i < model.k):
        raise ValidationError(f"component index {i} out of range for k={model.k}")
    t = float(t)
    if t < 0:
        raise ValidationError(f"sigma_t needs t >= 0, got {t}")
    if t == 0.0:
        return 0.0
    cfg = _config(tol)
    hh = model.h.h
    corr = sq.cross_correlation(model.kernels[i], model.kernels[i], t_max=t)
    res = sq.weighted_line_integral(corr, 0.0, hh, cfg)
    val = hh * (2.0 * hh - 1.0) * res.value
    return math.sqrt(max(val, 0.0))


def _shared_levels(ei: HermiteExpansion, ej: HermiteExpansion):
    top = min(ei.level, ej.level)
    out = []
    for l in range(max(ei.rank, ej.rank), top + 1):
        if ei.coeffs[l] != 0.0 and ej.coeffs[l] != 0.0:
            out.append(l)
    return out


def _discarded_tail_bound(model, i, j, etas, cfg):
    """Reported bound on the series tail cut off by numeric truncation.

    Uses sum_{l>L} l! |a_il a_jl| <= sqrt(disc_i disc_j) and bounds each
    normalized integral factor by sup_a |rho_Y|^qbar * int |rho_Y|^qbar with
    rho_Y the absolute-kernel normalized covariance. sup |rho_Y| can exceed
    1 for sign-changing kernels; the bound is then a diagnostic, not a
    certificate, which matches its reporting-only role.
    """
    ei, ej = model.expansions[i], model.expansions[j]
    disc = math.sqrt(ei.discarded_l2 * ej.discarded_l2)
    if disc == 0.0:
        return 0.0
    hh = model.h.h
    hfac = hh * (2.0 * hh - 1.0)
    qbar = max(ei.rank, ej.rank)
    corr_abs = sq.cross_correlation(model.kernels[i], model.kernels[j], absolute=True)
    cache = {}

    def rho_abs(a: float) -> float:
        return sq.weighted_line_integral(corr_abs, a, hh, cfg, cache=cache).value

    denom = etas.eta[i] * etas.eta[j]
    # Cauchy-Schwarz: rbar_abs_ij(a) <= sqrt(rbar_abs_ii(0) rbar_abs_jj(0)).
    sup_rho = hfac * math.sqrt(
        sq.double_weighted_integral(model.kernels[i], model.kernels[i], 0.0, hh,
                                    cfg, absolute=True).value
        * sq.double_weighted_integral(model.kernels[j], model.kernels[j], 0.0, hh,
                                      cfg, absolute=True).value
    ) / denom
    tail_pow = sq.PowerTail.for_correlation(corr_abs, hh, qbar)
    integral_q = sq.line_integral_power(rho_abs, qbar, cfg, tail_pow).value
    integral_q *= (hfac / denom) ** qbar
    return disc * sup_rho**qbar * integral_q


def lambda_matrix(model: ModelSpec, tol: float = 1e-6) -> LambdaMatrix:
    """Limit covariance of the normalized V functionals, entrywise certified.

    Each entry sums the finite shared expansion levels; every level's line
    integral int rbar_ij^l da runs through the certified power integrator,
    whose far-field closed form uses the exact signed kernel masses. Error
    bounds accumulate quadrature error, truncation, first-order eta
    propagation, and the reported numeric-expansion tail bound.
    """
    validate_hypotheses(model)
    cfg = _config(tol)
    etas = eta(model, tol=min(tol, 1e-7))
    hh = model.h.h
    hfac = hh * (2.0 * hh - 1.0)
    k = model.k
    entries = np.zeros((k, k))
    bounds = np.zeros((k, k))

    for i in range(k):
        for j in range(i, k):
            levels = _shared_levels(model.expansions[i], model.expansions[j])
            total = 0.0
            err = 0.0
            if levels:
                corr = sq.cross_correlation(model.kernels[i], model.kernels[j])
                cache = {}

                def rho(a: float) -> float:
                    return sq.weighted_line_integral(corr, a, hh, cfg,
                                                     cache=cache).value

                denom = etas.eta[i] * etas.eta[j]
                eta_rel = (etas.error_bounds[i] / etas.eta[i]
                           + etas.error_bounds[j] / etas.eta[j])
                for l in levels:
                    a_prod = (model.expansions[i].coeffs[l]
                              * model.expansions[j].coeffs[l])
                    scale = a_prod * math.factorial(l) * (hfac / denom) ** l
                    tail = sq.PowerTail.for_correlation(corr, hh, l)
                    res = sq.line_integral_power(rho, l, cfg, tail)
                    term = scale * res.value
                    total += term
                    err += abs(scale) * (res.error_estimate + res.truncation_bound)
                    err += abs(term) * l * eta_rel
            err += _discarded_tail_bound(model, i, j, etas, cfg)
            entries[i, j] = entries[j, i] = total
            bounds[i, j] = bounds[j, i] = err

    return LambdaMatrix(entries=entries, error_bounds=bounds)
