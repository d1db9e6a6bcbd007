"""Probabilists' Hermite polynomials and finite Hermite expansions.

The basis is He_l with He_0 = 1, He_1 = x, He_{l+1}(x) = x He_l(x) - l He_{l-1}(x),
orthogonal under the standard Gaussian weight with ||He_l||^2 = l!. Every
expansion here is centered (a_0 = 0): the limit theorems this package checks
apply to centered observables only, and the conversion routines refuse to
silently absorb a nonzero Gaussian mean.

The rank of an expansion is the smallest l >= 1 with a_l != 0. Numeric
expansions additionally carry the L2 mass their truncation discarded, so the
covariance-series code can report an honest tail bound instead of pretending
the expansion was exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import roots_hermitenorm

from ._accel import hermite_series
from .errors import NotCentered, QuadratureUnstable, ValidationError

__all__ = [
    "HermiteExpansion",
    "hermite_eval",
    "monomial_to_hermite",
    "hermite_to_monomial",
    "hermite_coefficients",
    "MAX_NUMERIC_LEVEL",
]

# Gauss-Hermite companion-matrix nodes stay well-conditioned at this size,
# and l! He_l cancellation in the projection is still far from fatal
MAX_NUMERIC_LEVEL = 30

# relative floor under which a numerically computed coefficient is treated
# as zero when locating the rank
_RANK_FLOOR = 1e-9


@dataclass(frozen=True)
class HermiteExpansion:
    """Finite centered expansion f = sum_{l>=1} coeffs[l] * He_l.

    coeffs[0] is stored (always 0.0) so index l addresses He_l directly.
    discarded_l2 bounds sum_{l>L} l! a_l^2 for numerically built expansions;
    exact polynomial conversions set it to 0.
    """

    coeffs: np.ndarray
    rank: int = field(init=False)
    discarded_l2: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.shape[0] < 2:
            raise ValidationError("expansion needs coefficients up to level >= 1")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("expansion coefficients must be finite")
        if coeffs[0] != 0.0:
            raise NotCentered(
                f"a_0 = {coeffs[0]!r} != 0; subtract the Gaussian mean first"
            )
        if self.discarded_l2 < 0:
            raise ValidationError("discarded_l2 must be >= 0")
        scale = np.max(np.abs(coeffs))
        if scale == 0.0:
            raise ValidationError("all coefficients vanish; rank undefined")
        nz = np.nonzero(np.abs(coeffs) > _RANK_FLOOR * scale)[0]
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rank", int(nz[0]))
        object.__setattr__(self, "discarded_l2", float(self.discarded_l2))

    @property
    def level(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, z):
        """Evaluate the expansion at z (scalar or array)."""
        return hermite_series(self.coeffs, np.asarray(z, dtype=np.float64))

    def weighted_sq_sum(self) -> float:
        """sum_l l! a_l^2, the L2(gaussian) norm squared of the expansion."""
        facts = np.array([math.factorial(l) for l in range(self.coeffs.shape[0])])
        return float(np.sum(facts * self.coeffs**2))


def hermite_eval(l: int, x):
    """He_l(x) by the three-term recurrence; x may be scalar or array."""
    l = int(l)
    if l < 0:
        raise ValidationError(f"polynomial degree must be >= 0, got {l}")
    coeffs = np.zeros(l + 1)
    coeffs[l] = 1.0
    out = hermite_series(coeffs, np.asarray(x, dtype=np.float64))
    if np.ndim(x) == 0:
        return float(out)
    return out


def monomial_to_hermite(monomial_coeffs) -> HermiteExpansion:
    """Exact basis change from sum c_j x^j to a centered Hermite expansion.

    Raises NotCentered when the Gaussian mean a_0 is nonzero.
    """
    c = np.asarray(monomial_coeffs, dtype=np.float64)
    if c.ndim != 1 or c.shape[0] < 2:
        raise ValidationError("polynomial must have degree >= 1")
    if not np.all(np.isfinite(c)):
        raise ValidationError("polynomial coefficients must be finite")
    a = hermite_e.poly2herme(c)
    if a.shape[0] < 2:
        a = np.concatenate([a, [0.0]])
    if a[0] != 0.0:
        raise NotCentered(
            f"Gaussian mean is {a[0]!r}; subtract it before expanding"
        )
    return HermiteExpansion(coeffs=a)


def hermite_to_monomial(expansion: HermiteExpansion) -> np.ndarray:
    """Exact inverse basis change, returning monomial coefficients."""
    return hermite_e.herme2poly(expansion.coeffs)


def hermite_coefficients(f, level: int, quad_points: int = 200,
                         center_tol: float = 1e-8) -> HermiteExpansion:
    """Project a callable onto He_1..He_level by Gauss-Hermite quadrature.

    a_l = (1/l!) int f(x) He_l(x) phi(x) dx on the exp(-x^2/2) Gauss nodes,
    with the 1/sqrt(2 pi) of the Gaussian density folded into the weights.
    The function must be centered (|a_0| <= center_tol) and square-integrable
    against the Gaussian weight. Levels beyond MAX_NUMERIC_LEVEL are refused:
    the l! normalization starts amplifying node-level noise past any useful
    accuracy.
    """
    level = int(level)
    if level < 1:
        raise ValidationError(f"truncation level must be >= 1, got {level}")
    if level > MAX_NUMERIC_LEVEL:
        raise QuadratureUnstable(
            f"truncation level {level} exceeds the stable maximum {MAX_NUMERIC_LEVEL}"
        )
    quad_points = int(quad_points)
    if quad_points < level + 1:
        raise ValidationError("need more quadrature points than the truncation level")

    nodes, weights = roots_hermitenorm(quad_points)
    w = weights / math.sqrt(2.0 * math.pi)
    fx = np.asarray([float(f(float(x))) for x in nodes])
    if not np.all(np.isfinite(fx)):
        raise ValidationError("function evaluations must be finite on the node set")
    norm_sq = float(np.sum(w * fx * fx))
    if not math.isfinite(norm_sq):
        raise ValidationError("function is not square-integrable against the Gaussian weight")

    coeffs = np.zeros(level + 1)
    captured = 0.0
    for l in range(level + 1):
        hl = hermite_eval(l, nodes)
        a_l = float(np.sum(w * fx * hl)) / math.factorial(l)
        coeffs[l] = a_l
        captured += math.factorial(l) * a_l * a_l
    if abs(coeffs[0]) > center_tol:
        raise NotCentered(
            f"Gaussian mean {coeffs[0]:.3e} exceeds centering tolerance {center_tol:.1e}"
        )
    coeffs[0] = 0.0
    discarded = max(norm_sq - captured, 0.0)
    return HermiteExpansion(coeffs=coeffs, discarded_l2=discarded)
