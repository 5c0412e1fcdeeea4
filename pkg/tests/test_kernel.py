"""Pair kernel W(r, t) against elementary values for the test density:
with d=3, omega(s)=s, rho2 = 1 on [1,2] the radial integrals reduce to
powers of s times exponentials."""

import math

import numpy as np
import pytest

from pathgibbs import SpectralDensity, eval_w, for_lattice, hessian_w, tabulate
from pathgibbs.kernel import (
    c_of_t,
    envelope,
    eval_w_many,
    hess_ab_factors,
    lam_d,
    tail_bound,
    tail_exponent,
)

PI = math.pi


def _w00(amp=1.0):
    return -amp * 1.5 * PI


def _w01(amp=1.0):
    return -amp * PI * (2.0 * math.exp(-1.0) - 3.0 * math.exp(-2.0))


def test_spot_values_direct(tdens):
    assert abs(eval_w(tdens, 0.0, 0.0) - _w00()) < 1e-10
    assert abs(eval_w(tdens, 0.0, 1.0) - _w01()) < 1e-10


def test_spot_values_scale_with_amp(tdens_half):
    assert abs(eval_w(tdens_half, 0.0, 0.0) - _w00(0.5)) < 1e-10
    assert abs(eval_w(tdens_half, 0.0, 1.0) - _w01(0.5)) < 1e-10


def test_spot_values_on_table_nodes(fine_kernel):
    # r=0 and t in {0, 1} are grid nodes, so only quadrature error remains
    assert abs(fine_kernel.w(0.0, 0.0) - _w00()) < 1e-8 * abs(_w00())
    assert abs(fine_kernel.w(0.0, 1.0) - _w01()) < 1e-8 * abs(_w01())


def test_evenness_in_t(tdens, fine_kernel):
    for r, t in [(0.0, 0.7), (1.3, 0.7), (2.6, 1.9)]:
        assert eval_w(tdens, r, t) == pytest.approx(eval_w(tdens, r, -t), rel=1e-13)
        assert fine_kernel.w(r, t) == fine_kernel.w(r, -t)


def test_envelope_dominates(tdens, fine_kernel):
    rng = np.random.default_rng(5)
    for _ in range(40):
        r = float(rng.uniform(0.0, 8.0))
        t = float(rng.uniform(0.0, 6.0))
        gam = fine_kernel.envelope(t)
        assert gam >= 0.0
        assert abs(fine_kernel.w(r, t)) <= gam * (1.0 + 1e-12)
    assert envelope(tdens, 0.3) >= abs(eval_w(tdens, 2.2, 0.3))


def test_c_of_t_and_hessian_trace(tdens):
    assert abs(c_of_t(tdens, 0.0) - 15.0 * PI / 4.0) < 1e-10
    h = hessian_w(tdens, np.zeros(3), 0.0)
    assert np.allclose(h, (5.0 * PI / 4.0) * np.eye(3), rtol=1e-9, atol=1e-12)
    # trace of the Hessian at x=0 is c(t) at any t
    tr = np.trace(hessian_w(tdens, np.zeros(3), 0.8))
    assert abs(tr - c_of_t(tdens, 0.8)) < 1e-10


def test_hessian_matches_finite_differences(tdens):
    x = np.array([0.6, -0.2, 0.35])
    t = 0.4
    h = hessian_w(tdens, x, t)
    step = 1e-3
    fd = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            ea, eb = np.zeros(3), np.zeros(3)
            ea[a] = step
            eb[b] = step
            fd[a, b] = (
                eval_w(tdens, np.linalg.norm(x + ea + eb), t)
                - eval_w(tdens, np.linalg.norm(x + ea - eb), t)
                - eval_w(tdens, np.linalg.norm(x - ea + eb), t)
                + eval_w(tdens, np.linalg.norm(x - ea - eb), t)
            ) / (4.0 * step * step)
    assert np.max(np.abs(h - fd)) < 1e-6


def test_tail_bound_closed_form(tdens):
    # int_T^inf gamma = pi (e^-T - e^-2T) / T for this density
    for T in (2.0, 10.0):
        want = PI * (math.exp(-T) - math.exp(-2.0 * T)) / T
        assert abs(tail_bound(tdens, T) - want) < 1e-12 * want + 1e-15


def test_tail_exponent_grows_for_exponential_decay(tdens):
    # gamma decays like e^-t here, so the fitted power grows with the window
    lo = tail_exponent(tdens, 1.0, 2.0)
    hi = tail_exponent(tdens, 4.0, 6.0)
    assert 0.0 < lo < hi


def test_lam_d_values():
    assert lam_d(1, 0.0) == 1.0
    assert abs(lam_d(2, 0.0) - 1.0) < 1e-15
    assert abs(lam_d(3, 0.0) - 1.0) < 1e-15
    assert abs(lam_d(1, 1.2) - math.cos(1.2)) < 1e-15
    assert abs(lam_d(2, 1.0) - 0.7651976865579666) < 1e-12
    assert abs(lam_d(3, PI)) < 1e-15
    with pytest.raises(ValueError):
        lam_d(4, 1.0)


def test_hess_ab_factor_identity():
    # a = -Lam'/u and b = Lam'/u - Lam'' with Lam'' + (d-1)Lam'/u + Lam = 0,
    # so b + d a = Lam in every dimension
    u = np.concatenate([np.linspace(1e-4, 0.2, 41), np.linspace(0.2, 20.0, 101)])
    for d in (1, 2, 3):
        a, b = hess_ab_factors(d, u)
        assert np.max(np.abs(b + d * a - lam_d(d, u))) < 1e-9
        a0, b0 = hess_ab_factors(d, np.zeros(1))
        assert abs(a0[0] - 1.0 / d) < 1e-15
        assert abs(b0[0]) < 1e-15


def test_hess_ab_series_joins_closed_form():
    # the series/closed-form switch at small u must be seamless
    u = np.linspace(0.03, 0.08, 201)
    for d in (1, 2, 3):
        a, b = hess_ab_factors(d, u)
        assert np.max(np.abs(np.diff(a, 2))) < 1e-7
        assert np.max(np.abs(np.diff(b, 2))) < 1e-7


def test_eval_w_many_matches_scalar(tdens):
    rs = np.array([0.0, 0.5, 1.7, 4.0])
    w = eval_w_many(tdens, rs, 0.6)
    for k, r in enumerate(rs):
        assert abs(w[k] - eval_w(tdens, float(r), 0.6)) < 1e-11


def test_interpolation_error_small(tdens):
    r_grid = np.linspace(0.0, 2.5, 201)
    t_grid = np.linspace(0.0, 1.25, 201)
    pk = tabulate(tdens, r_grid, t_grid, t_cut=1.25)
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(60):
        r = float(rng.uniform(0.0, 2.5))
        t = float(rng.uniform(0.0, 1.25))
        worst = max(worst, abs(pk.w(r, t) - eval_w(tdens, r, t)))
    assert worst < 1e-4


def test_for_lattice_grid_layout(tdens, fine_kernel):
    pk = fine_kernel
    assert pk.r_grid[0] == 0.0 and pk.r_grid[-1] == 8.0
    assert pk.t_grid[0] == 0.0 and pk.t_grid[-1] >= 6.0 - 1e-12
    assert np.allclose(np.diff(pk.t_grid), 0.25)
    assert pk.w_table.shape == (pk.r_grid.size, pk.t_grid.size)
    assert pk.tail >= 0.0


def test_table_clamps_radius_beyond_grid(fine_kernel):
    # radii past r_max reuse the last column rather than extrapolating
    assert fine_kernel.w(9.5, 0.5) == fine_kernel.w(8.0, 0.5)
