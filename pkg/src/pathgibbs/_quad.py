"""Adaptive composite Gauss-Legendre quadrature for radial integrals.

All integrands here live on a finite interval [a, b] and are vectorized
(take an ndarray of abscissas, return values of the same leading shape).
The driver doubles the panel count until two successive refinements agree
to a relative tolerance; failure to converge is classified by probing the
endpoint growth exponent and reported as a divergence with diagnostics.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre


class QuadratureError(Exception):
    """Base class for quadrature failures."""


class DivergentIntegralError(QuadratureError):
    """Integral failed to converge; carries the refinement history.

    Attributes:
        estimates: successive composite-rule values, coarsest first.
        exponent: probed endpoint power p (f ~ x^p), or None if the probe
            was inconclusive.
        endpoint: which endpoint the probe blames ('left'/'right'/None).
    """

    def __init__(self, message, estimates=None, exponent=None, endpoint=None):
        super().__init__(message)
        self.estimates = list(estimates) if estimates is not None else []
        self.exponent = exponent
        self.endpoint = endpoint


class _NotConverged(Exception):
    def __init__(self, estimates):
        self.estimates = estimates


_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _rule(order):
    if order not in _RULES:
        x, w = roots_legendre(order)
        _RULES[order] = (x, w)
    return _RULES[order]


def panel_nodes(a, b, n_panels, order):
    """Nodes and weights of the composite rule with n_panels equal panels."""
    x, w = _rule(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _refine(f, a, b, order, rtol, atol, max_levels):
    """Shared doubling loop. f(nodes) -> (n,) or (n, m); returns last value."""
    estimates = []
    prev = None
    for level in range(max_levels + 1):
        nodes, weights = panel_nodes(a, b, 2**level, order)
        vals = np.asarray(f(nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise _NotConverged(estimates)
        if vals.ndim == 1:
            cur = float(weights @ vals)
            scale = abs(cur)
            err = abs(cur - prev) if prev is not None else np.inf
        else:
            cur = weights @ vals
            scale = float(np.max(np.abs(cur)))
            err = float(np.max(np.abs(cur - prev))) if prev is not None else np.inf
        estimates.append(cur)
        if prev is not None and err <= rtol * scale + atol:
            return cur
        prev = cur
    raise _NotConverged(estimates)


def endpoint_exponent(f, a, b, side="left", n_probe=12):
    """Estimate p in f(x) ~ c*(x-a)^p (or (b-x)^p) by log-log regression.

    Returns None when the probe is inconclusive (zeros or non-finite values
    too close to the endpoint).
    """
    span = b - a
    hs = span * 2.0 ** (-np.arange(6, 6 + n_probe, dtype=float))
    xs = a + hs if side == "left" else b - hs
    ys = np.abs(np.asarray(f(xs), dtype=float))
    good = np.isfinite(ys) & (ys > 0.0)
    if good.sum() < 4:
        return None
    slope = np.polyfit(np.log(hs[good]), np.log(ys[good]), 1)[0]
    return float(slope)


def _classify_failure(f, a, b, estimates, what):
    probes = [(side, endpoint_exponent(f, a, b, side)) for side in ("left", "right")]
    worst_side, worst_p = None, None
    for side, p in probes:
        if p is not None and (worst_p is None or p < worst_p):
            worst_side, worst_p = side, p
    if worst_p is not None and worst_p <= -1.0 + 1e-9:
        msg = (
            f"{what} diverges: integrand grows like x^{worst_p:.3f} at the "
            f"{worst_side} endpoint (non-integrable)"
        )
    else:
        msg = (
            f"{what} did not converge after panel doubling; last estimates "
            f"{[float(np.max(np.abs(np.atleast_1d(e)))) for e in estimates[-3:]]}"
        )
    raise DivergentIntegralError(msg, estimates=estimates, exponent=worst_p, endpoint=worst_side)


def _sqrt_sub(f):
    # r = u^2 maps [0, b] to [0, sqrt(b)] and regularizes integer-power
    # behaviour at r=0; dr = 2u du.
    def g(u):
        vals = np.asarray(f(u * u), dtype=float)
        if vals.ndim == 1:
            return vals * (2.0 * u)
        return vals * (2.0 * u)[:, None]

    return g


def radial_integral(f, a, b, *, order=16, rtol=1e-12, atol=0.0, max_levels=12):
    """Integral of a scalar radial integrand on [a, b].

    Applies the u^2 substitution when a == 0 so that omega(r) -> 0 endpoints
    are handled without sampling r = 0 itself. Raises DivergentIntegralError
    with endpoint diagnostics when the refinement does not settle.
    """
    if not (b > a):
        raise ValueError(f"empty integration interval [{a}, {b}]")
    g, lo, hi = (f, a, b)
    if a == 0.0:
        g, lo, hi = _sqrt_sub(f), 0.0, np.sqrt(b)
    try:
        return _refine(g, lo, hi, order, rtol, atol, max_levels)
    except _NotConverged as nc:
        _classify_failure(f, a, b, nc.estimates, "radial integral")


def radial_integral_columns(f, a, b, *, order=16, rtol=1e-10, atol=0.0, max_levels=12):
    """Simultaneous integrals of the columns of f(nodes) -> (n, m).

    All columns share one adaptive refinement; convergence is judged on the
    worst column relative to the largest column magnitude, so absolutely
    small columns inherit an absolute error bound of rtol * max|I|.
    """
    if not (b > a):
        raise ValueError(f"empty integration interval [{a}, {b}]")
    g, lo, hi = (f, a, b)
    if a == 0.0:
        g, lo, hi = _sqrt_sub(f), 0.0, np.sqrt(b)
    try:
        return _refine(g, lo, hi, order, rtol, atol, max_levels)
    except _NotConverged as nc:

        def scalar(x):
            vals = np.asarray(f(x), dtype=float)
            return np.abs(vals).max(axis=1)

        _classify_failure(scalar, a, b, nc.estimates, "radial integral (tabulation)")
