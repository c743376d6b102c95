import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfshift.quadrature import adaptive_simpson, gaussian_density, integrate_density


def test_polynomial_exact():
    val, err = adaptive_simpson(lambda t: 3 * t**2 + 1, 0.0, 2.0)
    assert val == pytest.approx(10.0, abs=1e-12)
    assert err <= 1e-9


def test_logistic_integral_closed_form():
    f = lambda t: 1.0 / (1.0 + math.exp(-(t - 0.5)))
    val, err = adaptive_simpson(f, 0.0, 1.0)
    exact = math.log(1 + math.exp(0.5)) - math.log(1 + math.exp(-0.5))
    assert abs(val - exact) <= max(err, 1e-15)
    assert err <= 1e-9


def test_discontinuity_handled():
    # step at 0.3 forces deep refinement near the jump
    val, _ = adaptive_simpson(lambda t: 1.0 if t > 0.3 else 0.0, 0.0, 1.0, tol=1e-10)
    assert abs(val - 0.7) < 1e-6


def test_gaussian_mass():
    density = gaussian_density(1.0, 2.0)
    val, err = integrate_density(lambda t: 1.0, density, 1.0 - 24.0, 1.0 + 24.0)
    assert abs(val - 1.0) <= err < 1e-7


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 4), st.integers(0, 4))
def test_monomials(a, width, k):
    b = a + width
    val, _ = adaptive_simpson(lambda t: t**k, a, b)
    exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    assert abs(val - exact) <= 1e-8 * max(1.0, abs(exact))
