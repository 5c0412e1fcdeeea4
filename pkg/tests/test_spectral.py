"""Moment integrals for the test density have elementary values:
with d=3, omega(s)=s and rho2 = 1 on [1,2] every integrand is a power of s."""

import math

import numpy as np
import pytest

from pathgibbs import SpectralDensity, validate
from pathgibbs.spectral import c_rho, moment, parse_builtin, weighted_moment

PI = math.pi


def test_closed_form_moments(tdens):
    assert abs(moment(tdens, 1) - 6 * PI) < 1e-10
    assert abs(moment(tdens, 2) - 4 * PI) < 1e-10
    assert abs(moment(tdens, 3) - 4 * PI * math.log(2)) < 1e-10
    assert abs(weighted_moment(tdens, 2) - 28 * PI / 3) < 1e-10
    assert abs(weighted_moment(tdens, 4) - 4 * PI) < 1e-10


def test_moments_linear_in_amp(tdens):
    doubled = SpectralDensity(3, "power:1", "indicator", 1.0, 2.0, amp=2.0)
    for n in (1, 2, 3):
        assert abs(moment(doubled, n) - 2 * moment(tdens, n)) < 1e-9


def test_c_rho_is_half_third_moment(tdens):
    assert abs(c_rho(tdens) - 0.5 * moment(tdens, 3)) < 1e-12


def test_validate_accepts_test_density(tdens):
    rep = validate(tdens)
    assert rep.passed
    assert rep.violations == []
    assert abs(rep.i3 - 4 * PI * math.log(2)) < 1e-9
    assert np.isfinite(rep.j2) and np.isfinite(rep.j4)


def test_validate_rejects_infrared_divergence():
    # omega = s, d = 3, no infrared cutoff: the omega^-3 moment diverges
    bad = SpectralDensity(3, "power:1", "indicator", 0.0, 2.0)
    rep = validate(bad)
    assert not rep.passed
    assert any("i_3" in v.lower() for v in rep.violations)


def test_validate_flags_negative_rho2():
    sd = SpectralDensity(3, "power:1", lambda r: r - 1.5, 1.0, 2.0)
    rep = validate(sd)
    assert not rep.passed


def test_validate_flags_nonpositive_omega():
    sd = SpectralDensity(3, lambda r: r - 1.5, "indicator", 1.0, 2.0)
    rep = validate(sd)
    assert not rep.passed


def test_parse_builtin_forms():
    assert parse_builtin("power:2")(3.0) == 9.0
    assert parse_builtin("indicator")(7.0) == 1.0
    assert parse_builtin("zero")(7.0) == 0.0
    g = parse_builtin("gaussian:2.0")
    assert abs(g(2.0) - math.exp(-0.5)) < 1e-15
    with pytest.raises(ValueError):
        parse_builtin("banana")


def test_density_input_validation():
    with pytest.raises(ValueError):
        SpectralDensity(4, "power:1", "indicator", 1.0, 2.0)
    with pytest.raises(ValueError):
        SpectralDensity(3, "power:1", "indicator", 2.0, 1.0)
