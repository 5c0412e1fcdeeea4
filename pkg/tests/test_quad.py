import math

import numpy as np
import pytest

from pathgibbs._quad import (
    DivergentIntegralError,
    endpoint_exponent,
    radial_integral,
    radial_integral_columns,
)


def test_polynomial_exact():
    val = radial_integral(lambda r: r ** 3, 0.0, 1.0)
    assert abs(val - 0.25) < 1e-14


def test_oscillatory():
    val = radial_integral(np.cos, 0.0, 2.0 * math.pi, atol=1e-12)
    assert abs(val) < 1e-10


def test_exponential_tail_split():
    # integrand with very different scales at the two ends
    val = radial_integral(lambda r: np.exp(-10.0 * r), 0.0, 50.0)
    assert abs(val - 0.1) < 1e-12


def test_integrable_endpoint_singularity():
    val = radial_integral(lambda r: 1.0 / np.sqrt(r), 0.0, 1.0)
    assert abs(val - 2.0) < 1e-9


def test_divergent_endpoint_raises():
    with pytest.raises(DivergentIntegralError):
        radial_integral(lambda r: 1.0 / r, 0.0, 1.0)


def test_endpoint_exponent_estimates():
    p1 = endpoint_exponent(lambda r: 1.0 / r, 0.0, 1.0)
    p2 = endpoint_exponent(lambda r: 1.0 / r ** 2, 0.0, 1.0)
    assert abs(p1 + 1.0) < 0.05
    assert abs(p2 + 2.0) < 0.05


def test_columns_match_scalar_calls():
    def cols(r):
        r = np.asarray(r, dtype=float)
        return np.stack([r, r ** 2, np.cos(r)], axis=-1)

    vals = radial_integral_columns(cols, 0.0, 2.0)
    for k, f in enumerate([lambda r: r, lambda r: r ** 2, np.cos]):
        assert abs(vals[k] - radial_integral(f, 0.0, 2.0)) < 1e-12


def test_rtol_is_honored():
    loose = radial_integral(lambda r: np.exp(-r) * np.sin(3 * r), 0.0, 20.0, rtol=1e-6)
    tight = radial_integral(lambda r: np.exp(-r) * np.sin(3 * r), 0.0, 20.0, rtol=1e-13)
    assert abs(loose - tight) < 1e-5 * abs(tight)
