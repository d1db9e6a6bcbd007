"""Hermite expansion algebra against explicit closed forms."""
import math

import numpy as np
import pytest

from fracvolt.errors import NotCentered, ValidationError
from fracvolt.hermite import (
    MAX_NUMERIC_LEVEL,
    HermiteExpansion,
    hermite_coefficients,
    hermite_eval,
    hermite_to_monomial,
    monomial_to_hermite,
)
from oracles import hermite_explicit


def test_hermite_eval_matches_explicit_forms():
    x = np.linspace(-4.0, 4.0, 41)
    for l in range(7):
        got = hermite_eval(l, x)
        ref = hermite_explicit(l, x)
        scale = np.maximum(np.abs(ref), 1.0)
        assert np.max(np.abs(got - ref) / scale) < 1e-13


def test_expansion_rank_and_level():
    e = HermiteExpansion((0.0, 0.0, 1.0, 0.5))
    assert e.rank == 2
    assert e.level == 3
    assert HermiteExpansion((0.0, 1.0)).rank == 1


def test_expansion_requires_centering():
    with pytest.raises(NotCentered):
        HermiteExpansion((0.1, 1.0))
    with pytest.raises(ValidationError):
        HermiteExpansion((0.0, 0.0))  # all zero: rank undefined


def test_expansion_call_is_the_series():
    e = HermiteExpansion((0.0, 2.0, -1.0, 0.25))
    x = np.linspace(-3, 3, 17)
    ref = 2.0 * hermite_explicit(1, x) - hermite_explicit(2, x) + 0.25 * hermite_explicit(3, x)
    assert np.allclose(e(x), ref, rtol=1e-13, atol=1e-13)
    assert np.isscalar(float(e(1.5)))


def test_weighted_sq_sum_is_factorial_weighted():
    e = HermiteExpansion((0.0, 1.0, 0.5, 0.0, 0.25))
    ref = 1.0 + math.factorial(2) * 0.25 + math.factorial(4) * 0.0625
    assert abs(e.weighted_sq_sum() - ref) < 1e-14


def test_monomial_conversion_round_trip():
    # x^2 - 1 = He_2 exactly
    e = monomial_to_hermite([-1.0, 0.0, 1.0])
    assert np.allclose(e.coeffs, [0.0, 0.0, 1.0])
    assert e.rank == 2
    # x^3 = He_3 + 3 He_1
    e3 = monomial_to_hermite([0.0, 0.0, 0.0, 1.0])
    assert np.allclose(e3.coeffs, [0.0, 3.0, 0.0, 1.0])
    back = hermite_to_monomial(e3)
    assert np.allclose(back, [0.0, 0.0, 0.0, 1.0], atol=1e-14)


def test_monomial_conversion_rejects_uncentered():
    # E x^2 = 1 under the Gaussian, so x^2 alone is not centered
    with pytest.raises(NotCentered):
        monomial_to_hermite([0.0, 0.0, 0.5, 0.0, 0.0])  # mean 0.5 != 0
    monomial_to_hermite([-3.0, 0.0, 0.0, 0.0, 1.0])  # x^4 - 3: mean 3 - 3 = 0


def test_numeric_coefficients_recover_polynomial():
    target = HermiteExpansion((0.0, 0.5, 1.0, -0.25))
    num = hermite_coefficients(lambda z: target(z), level=6)
    assert np.allclose(num.coeffs[:4], target.coeffs, atol=1e-10)
    assert np.max(np.abs(num.coeffs[4:])) < 1e-10
    assert num.rank == 1


def test_numeric_coefficients_level_cap():
    with pytest.raises(ValidationError):
        hermite_coefficients(np.tanh, level=MAX_NUMERIC_LEVEL + 1)
