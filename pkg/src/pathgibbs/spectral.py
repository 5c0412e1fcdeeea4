"""Isotropic spectral densities and their moment integrals.

A spectral density is the pair (rho2, omega) on a radial support
[r_min, r_max] in dimension d: rho2(r) = |rho-hat|^2 restricted to radius r,
omega(r) the dispersion. Everything downstream (the pair potential, the
finite-mode field, the effective-diffusion bounds) is built from radial
integrals against these two functions, so the moment conditions live here:

    I_n = sigma_d * int r^(d-1) rho2(r) omega(r)^-n dr      (n = 1, 2, 3)
    J_n = sigma_d * int r^(d-1) rho2(r) r^2 omega(r)^-n dr  (n = 2, 4)

Finiteness of I_1..I_3 is what validate() enforces; the J moments are
diagnostics (finite J_2, J_4 is the sufficient condition for a strictly
positive effective diffusion) and only flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._quad import DivergentIntegralError, radial_integral, radial_integral_columns

# surface area of the unit sphere S^(d-1)
SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def parse_builtin(spec):
    """Map a builtin name to a vectorized radial function.

    Supported names: "power:<p>" -> r^p, "indicator" -> 1,
    "gaussian:<w>" -> exp(-(r/w)^2 / 2), "zero" -> 0.
    """
    if callable(spec):
        return spec
    name, _, arg = str(spec).partition(":")
    name = name.strip()
    if name == "power":
        p = float(arg)
        return lambda r: np.power(np.asarray(r, dtype=float), p)
    if name == "indicator":
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    if name == "gaussian":
        w = float(arg)
        if w <= 0:
            raise ValueError("gaussian width must be positive")
        return lambda r: np.exp(-0.5 * (np.asarray(r, dtype=float) / w) ** 2)
    if name == "zero":
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    raise ValueError(f"unknown builtin function {spec!r}")


@dataclass(frozen=True)
class SpectralDensity:
    """Radial spectral data (rho2, omega) on [r_min, r_max] in dimension d.

    omega and rho2 may be builtin names (see parse_builtin) or callables;
    the config surface only exposes the builtins. amp scales rho2 (the
    overall coupling strength); all moments are linear in it.
    """

    d: int
    omega: object
    rho2: object
    r_min: float
    r_max: float
    quad_nodes: int = 16
    amp: float = 1.0
    omega_fn: Callable = field(init=False, repr=False, compare=False)
    rho2_fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in SPHERE_AREA:
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not (0.0 <= self.r_min < self.r_max < math.inf):
            raise ValueError(f"need 0 <= r_min < r_max < inf, got [{self.r_min}, {self.r_max}]")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be at least 2")
        if self.amp < 0:
            raise ValueError("amp must be nonnegative")
        object.__setattr__(self, "omega_fn", parse_builtin(self.omega))
        object.__setattr__(self, "rho2_fn", parse_builtin(self.rho2))

    def rho2_values(self, r):
        """amp * rho2(r), zero outside the support."""
        r = np.asarray(r, dtype=float)
        inside = (r >= self.r_min) & (r <= self.r_max)
        return np.where(inside, self.amp * self.rho2_fn(r), 0.0)

    def radial_weight(self, r):
        """sigma_d * r^(d-1) * amp * rho2(r), the measure all moments share."""
        r = np.asarray(r, dtype=float)
        return SPHERE_AREA[self.d] * r ** (self.d - 1) * self.amp * self.rho2_fn(r)


@dataclass
class ValidationReport:
    passed: bool
    i1: float
    i2: float
    i3: float
    j2: float
    j4: float
    violations: list
    flags: list

    def as_dict(self):
        return {
            "passed": self.passed,
            "I1": self.i1,
            "I2": self.i2,
            "I3": self.i3,
            "J2": self.j2,
            "J4": self.j4,
            "violations": list(self.violations),
            "flags": list(self.flags),
        }


def _moment_integral(sd, extra_r_power, omega_power, rtol):
    def f(r):
        w = sd.radial_weight(r)
        if extra_r_power:
            w = w * r**extra_r_power
        return w * sd.omega_fn(r) ** (-float(omega_power))

    return radial_integral(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)


def moment(sd: SpectralDensity, n: int, *, rtol=1e-12) -> float:
    """I_n = sigma_d * int r^(d-1) rho2 omega^-n dr for n in {1, 2, 3}.

    Raises DivergentIntegralError when the integral is non-finite.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"moment order must be 1, 2 or 3, got {n}")
    return _moment_integral(sd, 0, n, rtol)


def weighted_moment(sd: SpectralDensity, n: int, *, rtol=1e-12) -> float:
    """J_n = sigma_d * int r^(d-1) rho2 r^2 omega^-n dr for n in {2, 4}."""
    if n not in (2, 4):
        raise ValueError(f"weighted moment order must be 2 or 4, got {n}")
    return _moment_integral(sd, 2, n, rtol)


def c_rho(sd: SpectralDensity, *, rtol=1e-12) -> float:
    """Superadditivity constant I_3 / 2 (one valid choice, not canonical).

    For any two disjoint time windows the interaction across the gap is
    bounded by this constant, uniformly in the window lengths and the gap.
    """
    return 0.5 * moment(sd, 3, rtol=rtol)


def validate(sd: SpectralDensity, *, rtol=1e-12, n_probe=2048) -> ValidationReport:
    """Structural and moment checks; passed <=> violations empty.

    I_1..I_3 divergence is a violation; J_2/J_4 divergence only flags
    (condition for the strict diffusion lower bound, not for validity).
    """
    violations = []
    flags = []

    r = np.linspace(sd.r_min, sd.r_max, n_probe)
    if sd.r_min == 0.0:
        r = r[1:]
    rho = sd.rho2_values(r)
    om = sd.omega_fn(r)
    if not np.all(np.isfinite(rho)):
        violations.append("rho2 non-finite on support")
    elif np.any(rho < -1e-12):
        violations.append("rho2 negative on support")
    if not np.all(np.isfinite(om)):
        violations.append("omega non-finite on support")
    elif np.any(om < 0.0):
        violations.append("omega negative on support")
    elif sd.r_min > 0.0 and np.any(om <= 0.0):
        violations.append("omega vanishes on support with r_min > 0")

    def try_moment(fn, order, label, hard):
        try:
            return fn(sd, order, rtol=rtol)
        except DivergentIntegralError as exc:
            text = f"{label} divergent: {exc}"
            (violations if hard else flags).append(text)
            return math.inf

    i1 = try_moment(moment, 1, "I_1", True)
    i2 = try_moment(moment, 2, "I_2", True)
    i3 = try_moment(moment, 3, "I_3", True)
    j2 = try_moment(weighted_moment, 2, "J_2", False)
    j4 = try_moment(weighted_moment, 4, "J_4", False)

    return ValidationReport(
        passed=not violations, i1=i1, i2=i2, i3=i3, j2=j2, j4=j4,
        violations=violations, flags=flags,
    )
