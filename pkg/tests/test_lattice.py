"""Discretized path energy: closed-form small cases, brute-force double
sums for the pair term, finite differences for grad and the assembled
comparison matrix."""

import numpy as np
import pytest

from pathgibbs import LatticeModel, PathConfig, assemble_M, energy, hessian_w, laplacian0
from pathgibbs.kernel import eval_w
from pathgibbs.lattice import (
    delta_energy,
    energy_terms,
    free_sites,
    grad,
    lag_table_to_pairs,
    reflect,
)


def test_pinned_site_enforced():
    x = np.zeros((5, 1))
    x[2, 0] = 0.3
    with pytest.raises(ValueError, match="pinned"):
        PathConfig(eps=0.5, N=2, x=x)
    pc = PathConfig.zeros(0.5, 2, 1)
    assert pc.x.shape == (5, 1)
    assert pc.d == 1


def test_free_sample_law():
    rng = np.random.default_rng(17)
    eps, N, d = 0.25, 3, 1
    draws = np.stack([PathConfig.free_sample(eps, N, d, rng).x for _ in range(3000)])
    assert np.all(draws[:, N] == 0.0)
    # each free site is a Brownian value at distance |i - N| from the pin
    for site, dist in [(N + 1, 1), (N + 3, 3), (N - 2, 2), (0, 3)]:
        var = draws[:, site, 0].var()
        assert abs(var - eps * dist) < 5.0 * eps * dist * np.sqrt(2.0 / 3000)


def test_free_energy_closed_form():
    eps, kappa = 0.5, 0.8
    lm = LatticeModel(None, eps=eps, N=1, kappa=kappa)
    x = np.array([[0.7], [0.0], [-0.4]])
    t = energy_terms(lm, PathConfig(eps=eps, N=1, x=x))
    assert t["pair"] == 0.0 and t["tail_bound"] == 0.0
    assert abs(t["kinetic"] - (0.7**2 + 0.4**2) / (2 * eps)) < 1e-14
    assert abs(t["mass"] - 0.5 * kappa * eps * (0.7**2 + 0.4**2)) < 1e-14
    assert lm.J == 0


def test_pair_term_matches_brute_force(tdens, fine_kernel):
    eps, N = 0.25, 3
    lm = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.0, use_tables=False)
    rng = np.random.default_rng(3)
    x = 0.3 * rng.normal(size=(2 * N + 1, 3))
    x[N] = 0.0
    pc = PathConfig(eps=eps, N=N, x=x)
    acc = 0.0
    for i in range(2 * N + 1):
        for j in range(2 * N + 1):
            if abs(i - j) <= lm.J:
                r = float(np.linalg.norm(x[i] - x[j]))
                acc += eval_w(tdens, r, eps * (i - j))
    want = 0.5 * eps**2 * acc
    got = energy_terms(lm, pc)["pair"]
    assert abs(got - want) < 1e-9 * abs(want)


def test_tables_agree_with_direct_quadrature(fine_kernel):
    eps, N = 0.25, 4
    rng = np.random.default_rng(4)
    x = 0.4 * rng.normal(size=(2 * N + 1, 3))
    x[N] = 0.0
    pc = PathConfig(eps=eps, N=N, x=x)
    tab = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.1)
    direct = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.1, use_tables=False)
    pt, pd = energy_terms(tab, pc)["pair"], energy_terms(direct, pc)["pair"]
    assert abs(pt - pd) < 1e-5 * abs(pd)


def test_energy_is_sum_of_terms(fine_kernel):
    lm = LatticeModel(fine_kernel, eps=0.25, N=4, kappa=0.2)
    rng = np.random.default_rng(8)
    x = 0.3 * rng.normal(size=(9, 3))
    x[4] = 0.0
    pc = PathConfig(eps=0.25, N=4, x=x)
    t = energy_terms(lm, pc)
    assert abs(energy(lm, pc) - (t["kinetic"] + t["mass"] + t["pair"])) < 1e-12


def test_delta_energy_matches_full_difference(fine_kernel):
    eps, N = 0.25, 4
    lm = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.3)
    rng = np.random.default_rng(12)
    x = 0.3 * rng.normal(size=(2 * N + 1, 3))
    x[N] = 0.0
    pc = PathConfig(eps=eps, N=N, x=x)
    e0 = energy(lm, pc)
    for site in (-N, -2, 1, N):  # signed labels, 0 is the pin
        idx = site + N
        prop = x[idx] + 0.2 * rng.normal(size=3)
        dh = delta_energy(lm, pc, site, prop)
        x2 = x.copy()
        x2[idx] = prop
        e1 = energy(lm, PathConfig(eps=eps, N=N, x=x2))
        assert abs(dh - (e1 - e0)) < 1e-9 * max(1.0, abs(e1 - e0))


def test_delta_energy_rejects_pinned_site(fine_kernel):
    lm = LatticeModel(fine_kernel, eps=0.25, N=2, kappa=0.0)
    pc = PathConfig.zeros(0.25, 2, 3)
    with pytest.raises(ValueError, match="pinned"):
        delta_energy(lm, pc, 0, np.ones(3))
    with pytest.raises(ValueError, match="outside"):
        delta_energy(lm, pc, 3, np.ones(3))


def test_grad_matches_finite_differences(fine_kernel):
    # direct quadrature so W and its radial derivative are exactly consistent
    # (the tabulated A factors are not the derivative of the interpolated W)
    eps, N = 0.25, 3
    lm = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.2, use_tables=False)
    rng = np.random.default_rng(21)
    x = 0.3 * rng.normal(size=(2 * N + 1, 3))
    x[N] = 0.0
    g = grad(lm, PathConfig(eps=eps, N=N, x=x))
    assert g.shape == x.shape
    assert np.all(g[N] == 0.0)
    h = 1e-5
    for site, comp in [(0, 0), (2, 1), (N + 2, 2), (2 * N, 0)]:
        xp, xm = x.copy(), x.copy()
        xp[site, comp] += h
        xm[site, comp] -= h
        fd = (
            energy(lm, PathConfig(eps=eps, N=N, x=xp))
            - energy(lm, PathConfig(eps=eps, N=N, x=xm))
        ) / (2 * h)
        assert abs(g[site, comp] - fd) < 1e-6 * max(1.0, abs(fd))


def test_laplacian0_hand_matrix():
    lap = laplacian0(2)
    want = np.array(
        [
            [-1.0, 1.0, 0.0, 0.0],
            [1.0, -2.0, 0.0, 0.0],
            [0.0, 0.0, -2.0, 1.0],
            [0.0, 0.0, 1.0, -1.0],
        ]
    )
    assert np.array_equal(lap, want)
    assert np.all(np.linalg.eigvalsh(-lap) > 0.0)
    assert list(free_sites(2)) == [-2, -1, 1, 2]


def test_assembled_matrix_is_energy_hessian(tdens, fine_kernel):
    # with K set to the actual pair Hessians of a frozen path, the comparison
    # matrix reduces to the exact second derivative of the energy there
    eps, N = 0.25, 3
    lm = LatticeModel(fine_kernel, eps=eps, N=N, kappa=0.15, use_tables=False)
    rng = np.random.default_rng(31)
    S = 2 * N + 1
    x = 0.3 * rng.normal(size=(S, 3))
    x[N] = 0.0
    pc = PathConfig(eps=eps, N=N, x=x)

    k_pairs = np.zeros((S, S, 3, 3))
    for i in range(S):
        for j in range(S):
            if i != j and abs(i - j) <= lm.J:
                k_pairs[i, j] = hessian_w(tdens, x[i] - x[j], eps * (i - j))
    m = assemble_M(lm, k_pairs)

    free = np.concatenate([np.arange(0, N), np.arange(N + 1, S)])
    h = 1e-4
    fd = np.zeros_like(m)
    for col, (site, comp) in enumerate((s, c) for s in free for c in range(3)):
        xp, xm = x.copy(), x.copy()
        xp[site, comp] += h
        xm[site, comp] -= h
        gp = grad(lm, PathConfig(eps=eps, N=N, x=xp))[free].ravel()
        gm = grad(lm, PathConfig(eps=eps, N=N, x=xm))[free].ravel()
        fd[:, col] = (gp - gm) / (2 * h)
    assert np.max(np.abs(m - fd)) < 5e-6


def test_reflect_preserves_energy(fine_kernel):
    lm = LatticeModel(fine_kernel, eps=0.25, N=4, kappa=0.1)
    rng = np.random.default_rng(41)
    x = 0.3 * rng.normal(size=(9, 3))
    x[4] = 0.0
    pc = PathConfig(eps=0.25, N=4, x=x)
    assert abs(energy(lm, reflect(pc)) - energy(lm, pc)) < 1e-12
    assert np.array_equal(reflect(reflect(pc)).x, pc.x)


def test_lag_tables_and_j(fine_kernel):
    lm = LatticeModel(fine_kernel, eps=0.25, N=64, kappa=0.0)
    assert lm.J == 24  # ceil(t_cut / eps) with t_cut = 6
    w_lag, dr = lm.lag_tables()
    assert w_lag.shape == (lm.J + 1, fine_kernel.r_grid.size)
    assert dr == pytest.approx(fine_kernel.r_grid[1] - fine_kernel.r_grid[0])
    for j in (0, 7, 24):
        assert np.allclose(w_lag[j], fine_kernel.w_table[:, j])
    small = LatticeModel(fine_kernel, eps=0.25, N=4, kappa=0.0)
    assert small.J == 8  # clipped at 2N


def test_lag_table_to_pairs_layout(fine_kernel):
    lm = LatticeModel(fine_kernel, eps=0.25, N=4, kappa=0.0)
    rng = np.random.default_rng(52)
    k_lags = rng.normal(size=(lm.J + 1, 3, 3))
    pairs = lag_table_to_pairs(lm, k_lags)
    S = 2 * lm.N + 1
    assert pairs.shape == (S, S, 3, 3)
    sym = 0.5 * (k_lags[2] + k_lags[2].T)
    assert np.array_equal(pairs[1, 3], sym)
    assert np.array_equal(pairs[3, 1], sym)
    assert np.all(pairs[0, lm.J + 1 :] == 0.0) if lm.J + 1 < S else True
