"""Retarded pair potential induced by a spectral density.

For a spectral density (rho2, omega) the translation-invariant pair
potential between path increments at spatial separation x and time lag t is

    W(x, t) = -1/2 * sigma_d * int s^(d-1) rho2(s) Lam_d(s|x|)
              * exp(-omega(s)|t|) / (2 omega(s)) ds,

where Lam_d is the angular average of a plane wave over the sphere
(cos for d=1, J_0 for d=2, sin(u)/u for d=3). W is even in t, isotropic
in x, nonpositive at x=0, and dominated by the envelope
gamma(t) = -W(0, t).

The spatial Hessian factorizes isotropically,

    d_a d_b W(x, t) = A(r, t) delta_ab + B(r, t) xhat_a xhat_b,

with A, B given by the same radial integral against
a_d(u) = -Lam_d'(u)/u and b_d(u) = Lam_d'(u)/u - Lam_d''(u). At x = 0 the
Hessian is (c(t)/d) * I with c(t) the trace integral.

PairKernel holds tables of W, A, B on an (r, t) grid with bilinear lookup,
truncated to zero beyond a time cutoff t_cut, plus the tail mass
int_{t_cut}^inf gamma dt used in truncation accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j0 as _bessel_j0, j1 as _bessel_j1, spherical_jn

from ._quad import radial_integral, radial_integral_columns
from .spectral import SpectralDensity

# crossover below which the angular factors use their power series
_U0 = 0.05


def lam_d(d, u):
    """Angular average of exp(i k.x) over directions: Lam_d(|k||x|)."""
    u = np.asarray(u, dtype=float)
    if d == 1:
        return np.cos(u)
    if d == 2:
        return _bessel_j0(u)
    if d == 3:
        return np.sinc(u / np.pi)
    raise ValueError(f"d must be 1, 2 or 3, got {d}")


def hess_ab_factors(d, u):
    """(a_d(u), b_d(u)) with a_d = -Lam'/u, b_d = Lam'/u - Lam''.

    a_d(0) = 1/d and b_d(0) = 0 in every dimension; series expansions are
    used below u = 0.05 where the closed forms lose digits to cancellation.
    """
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _U0
    us = np.where(small, u, 0.0)
    ub = np.where(small, 1.0, u)  # keep closed forms away from u=0
    u2 = us * us
    if d == 1:
        a = np.sinc(u / np.pi)
        b_series = u2 * (-1.0 / 3.0 + u2 * (1.0 / 30.0 - u2 / 840.0))
        b_closed = np.cos(ub) - np.sinc(ub / np.pi)
        return a, np.where(small, b_series, b_closed)
    if d == 2:
        a_series = 0.5 + u2 * (-1.0 / 16.0 + u2 * (1.0 / 384.0 - u2 / 18432.0))
        a_closed = _bessel_j1(ub) / ub
        b_series = u2 * (-1.0 / 8.0 + u2 * (1.0 / 96.0 - u2 / 3072.0))
        b_closed = _bessel_j0(ub) - 2.0 * _bessel_j1(ub) / ub
        return np.where(small, a_series, a_closed), np.where(small, b_series, b_closed)
    if d == 3:
        a_series = 1.0 / 3.0 + u2 * (-1.0 / 30.0 + u2 * (1.0 / 840.0 - u2 / 45360.0))
        j1v = spherical_jn(1, np.abs(ub))
        a_closed = j1v / ub * np.sign(ub)  # j1 odd: j1(u)/u even
        b_series = u2 * (-1.0 / 15.0 + u2 * (1.0 / 210.0 - u2 / 7560.0))
        b_closed = np.sinc(ub / np.pi) - 3.0 * j1v / np.abs(ub)
        return np.where(small, a_series, a_closed), np.where(small, b_series, b_closed)
    raise ValueError(f"d must be 1, 2 or 3, got {d}")


def _base(sd, s):
    # sigma_d s^(d-1) rho2(s) / (2 omega(s)); shared weight of every integral
    return sd.radial_weight(s) / (2.0 * sd.omega_fn(s))


def _w_direct_columns(sd, r_vals, t, rtol):
    """W(r_k, t) for an array of radii at one time, single adaptive pass."""
    r_vals = np.atleast_1d(np.asarray(r_vals, dtype=float))
    at = abs(float(t))

    def f(s):
        base = _base(sd, s)
        damp = np.exp(-sd.omega_fn(s) * at)
        return (-0.5 * base * damp)[:, None] * lam_d(sd.d, np.outer(s, r_vals))

    return radial_integral_columns(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)


def _hess_ab_direct_columns(sd, r_vals, t, rtol):
    """(A(r_k, t), B(r_k, t)) columns at one time, single adaptive pass."""
    r_vals = np.atleast_1d(np.asarray(r_vals, dtype=float))
    nr = r_vals.size
    at = abs(float(t))

    def f(s):
        pre = 0.5 * _base(sd, s) * s * s * np.exp(-sd.omega_fn(s) * at)
        av, bv = hess_ab_factors(sd.d, np.outer(s, r_vals))
        return np.hstack([pre[:, None] * av, pre[:, None] * bv])

    cols = radial_integral_columns(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)
    return cols[:nr], cols[nr:]


def eval_w_many(sd, r_vals, t, *, rtol=1e-12):
    """W(r_k, t) for an array of radii at a single time lag, by quadrature."""
    return _w_direct_columns(sd, r_vals, t, rtol)


def hess_ab_direct(sd, r_vals, t, *, rtol=1e-12):
    """(A, B) Hessian factors at one time for an array of radii, by quadrature."""
    return _hess_ab_direct_columns(sd, r_vals, t, rtol)


def eval_w(source, r, t, *, rtol=1e-12):
    """W at radius r and time lag t; direct quadrature for a SpectralDensity,
    bilinear table lookup for a PairKernel."""
    if isinstance(source, PairKernel):
        return source.w(r, t)
    return float(_w_direct_columns(source, [float(r)], t, rtol)[0])


def envelope(source, t, *, rtol=1e-12):
    """gamma(t) = -W(0, t) >= 0; dominates |W(x, t)| over all x."""
    if isinstance(source, PairKernel):
        return -source.w(0.0, t)
    return -eval_w(source, 0.0, t, rtol=rtol)


def c_of_t(sd: SpectralDensity, t, *, rtol=1e-12) -> float:
    """Trace of the Hessian of W at x = 0:
    c(t) = 1/2 sigma_d int s^(d-1) rho2 s^2 exp(-omega|t|)/(2 omega) ds."""
    at = abs(float(t))

    def f(s):
        return 0.5 * _base(sd, s) * s * s * np.exp(-sd.omega_fn(s) * at)

    return radial_integral(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)


def hessian_w(source, x, t, *, rtol=1e-12):
    """Spatial Hessian of W at displacement x (length-d vector), lag t."""
    x = np.asarray(x, dtype=float)
    d = x.size
    r = float(np.linalg.norm(x))
    if isinstance(source, PairKernel):
        a, b = source.hess_ab(r, t)
        a, b = float(a), float(b)
    else:
        if d != source.d:
            raise ValueError(f"x has dimension {d}, density has d={source.d}")
        av, bv = _hess_ab_direct_columns(source, [r], t, rtol)
        a, b = float(av[0]), float(bv[0])
    h = a * np.eye(d)
    if r > 0.0:
        xhat = x / r
        h += b * np.outer(xhat, xhat)
    return h


def tail_bound(sd: SpectralDensity, t_cut, *, rtol=1e-12) -> float:
    """int_{t_cut}^inf gamma(t) dt = 1/2 sigma_d int s^(d-1) rho2
    exp(-omega t_cut) / (2 omega^2) ds."""
    tc = float(t_cut)
    if tc < 0:
        raise ValueError("t_cut must be nonnegative")

    def f(s):
        om = sd.omega_fn(s)
        return 0.5 * _base(sd, s) * np.exp(-om * tc) / om

    return radial_integral(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)


def tail_exponent(source, t_lo, t_hi, *, n_pts=33, rtol=1e-10):
    """Fitted decay exponent p of gamma(t) ~ t^-p over [t_lo, t_hi].

    Least-squares slope of -log gamma against log t on a log-spaced grid.
    Reports the fit; makes no claim that the decay is actually polynomial.
    source may be a SpectralDensity, a PairKernel, or a callable gamma(t).
    """
    if not (0 < t_lo < t_hi):
        raise ValueError("need 0 < t_lo < t_hi")
    ts = np.geomspace(t_lo, t_hi, n_pts)
    if callable(source) and not isinstance(source, (SpectralDensity, PairKernel)):
        gam = np.asarray([float(source(t)) for t in ts])
    else:
        gam = np.asarray([envelope(source, t, rtol=rtol) for t in ts])
    if np.any(gam <= 0.0) or not np.all(np.isfinite(gam)):
        raise ValueError("envelope must be finite and positive on the fit window")
    return float(np.polyfit(np.log(ts), -np.log(gam), 1)[0])


def _bilinear(r_grid, t_grid, table, r, t):
    r = np.clip(np.asarray(r, dtype=float), r_grid[0], r_grid[-1])
    t = np.clip(np.abs(np.asarray(t, dtype=float)), t_grid[0], t_grid[-1])
    ir = np.clip(np.searchsorted(r_grid, r, side="right") - 1, 0, r_grid.size - 2)
    it = np.clip(np.searchsorted(t_grid, t, side="right") - 1, 0, t_grid.size - 2)
    fr = (r - r_grid[ir]) / (r_grid[ir + 1] - r_grid[ir])
    ft = (t - t_grid[it]) / (t_grid[it + 1] - t_grid[it])
    v00 = table[ir, it]
    v10 = table[ir + 1, it]
    v01 = table[ir, it + 1]
    v11 = table[ir + 1, it + 1]
    return (1 - fr) * (1 - ft) * v00 + fr * (1 - ft) * v10 + (1 - fr) * ft * v01 + fr * ft * v11


@dataclass
class PairKernel:
    """Tabulated W, A, B on an (r_grid, t_grid) mesh with bilinear lookup.

    Lookups are even in t and truncate to 0 for |t| > t_cut; radii beyond
    r_grid[-1] clamp to the boundary value (size the grid so this is rare;
    the sampler counts such clamps). tail is int_{t_cut}^inf gamma dt.
    """

    source: SpectralDensity
    r_grid: np.ndarray
    t_grid: np.ndarray
    w_table: np.ndarray
    a_table: np.ndarray
    b_table: np.ndarray
    t_cut: float
    tail: float

    @property
    def d(self):
        return self.source.d

    def _masked(self, table, r, t):
        vals = _bilinear(self.r_grid, self.t_grid, table, r, t)
        cut = np.abs(np.asarray(t, dtype=float)) > self.t_cut
        return np.where(cut, 0.0, vals) if np.ndim(vals) else (0.0 if cut else float(vals))

    def w(self, r, t):
        return self._masked(self.w_table, r, t)

    def hess_ab(self, r, t):
        return self._masked(self.a_table, r, t), self._masked(self.b_table, r, t)

    def hessian(self, x, t):
        return hessian_w(self, x, t)

    def envelope(self, t):
        return -self.w(0.0, t)

    def tail_exponent(self, t_lo, t_hi, **kw):
        return tail_exponent(self, t_lo, t_hi, **kw)

    def lag_column(self, table, j):
        """Column of a table at t_grid[j] (used by the lattice fast path)."""
        return np.ascontiguousarray(table[:, j])


def tabulate(sd: SpectralDensity, r_grid, t_grid, t_cut, *, rtol=1e-10) -> PairKernel:
    """Build the (W, A, B) tables by one adaptive radial pass per radius row.

    Requires r_grid[0] == 0 (so the envelope column exists), t_grid[0] == 0,
    both strictly increasing, and t_cut <= t_grid[-1].
    """
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if r_grid.ndim != 1 or r_grid.size < 2 or np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be strictly increasing with at least 2 nodes")
    if r_grid[0] != 0.0:
        raise ValueError("r_grid must start at 0")
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least 2 nodes")
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    t_cut = float(t_cut)
    if not (0.0 < t_cut <= t_grid[-1] + 1e-12):
        raise ValueError("need 0 < t_cut <= t_grid[-1]")

    nr, nt = r_grid.size, t_grid.size
    w_tab = np.empty((nr, nt))
    a_tab = np.empty((nr, nt))
    b_tab = np.empty((nr, nt))
    for i, r in enumerate(r_grid):

        def f(s):
            base = _base(sd, s)
            damp = np.exp(-np.outer(sd.omega_fn(s), t_grid))
            lam = lam_d(sd.d, s * r)
            av, bv = hess_ab_factors(sd.d, s * r)
            s2 = s * s
            return np.hstack(
                [
                    (-0.5 * base * lam)[:, None] * damp,
                    (0.5 * base * s2 * av)[:, None] * damp,
                    (0.5 * base * s2 * bv)[:, None] * damp,
                ]
            )

        cols = radial_integral_columns(f, sd.r_min, sd.r_max, order=sd.quad_nodes, rtol=rtol)
        w_tab[i] = cols[:nt]
        a_tab[i] = cols[nt : 2 * nt]
        b_tab[i] = cols[2 * nt :]

    return PairKernel(
        source=sd, r_grid=r_grid, t_grid=t_grid,
        w_table=w_tab, a_table=a_tab, b_table=b_tab,
        t_cut=t_cut, tail=tail_bound(sd, t_cut),
    )


def for_lattice(sd: SpectralDensity, eps, t_cut, r_max, n_r, *, rtol=1e-10) -> PairKernel:
    """Tabulate on grids aligned with a lattice: uniform radii and lag times
    t_j = eps*j for j = 0..J, J = ceil(t_cut/eps). The effective cutoff is
    eps*J >= t_cut (never discards requested range)."""
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    j_max = max(1, math.ceil(t_cut / eps - 1e-9))
    t_grid = eps * np.arange(j_max + 1)
    r_grid = np.linspace(0.0, float(r_max), int(n_r))
    return tabulate(sd, r_grid, t_grid, eps * j_max, rtol=rtol)
