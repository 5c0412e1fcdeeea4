"""Discretized pinned-path energy and its derivative structures.

A configuration is x = (x_{-N}, ..., x_N) in R^d with x_0 = 0 pinned
structurally (site 0 carries no degrees of freedom). The energy is

    H(x) = 1/(2 eps) sum_{j=-N}^{N-1} |x_{j+1} - x_j|^2
         + (kappa eps / 2) sum_j |x_j|^2
         + (eps^2 / 2) sum_{|i-j| <= J} W(x_i - x_j, eps (i - j)),

with the pair sum truncated at lag J = ceil(t_cut / eps) and the discarded
tail accounted for by the kernel's stored tail bound.

Array convention: site s corresponds to row s + N; free sites are ordered
(-N..-1, 1..N) when flattened into vectors/matrices of size 2N(d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel as _kernel
from .kernel import PairKernel

# direct (untabulated) kernel lookups; tight so finite differences of the
# energy stay smooth at h = 1e-5
_DIRECT_RTOL = 1e-13


@dataclass
class PathConfig:
    """Pinned lattice path: x[(site)+N] is the position at that site."""

    eps: float
    N: int
    x: np.ndarray  # (2N+1, d)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.eps <= 0 or self.N < 1:
            raise ValueError("need eps > 0 and N >= 1")
        if self.x.shape[0] != 2 * self.N + 1:
            raise ValueError(f"x must have {2 * self.N + 1} rows, got {self.x.shape[0]}")
        if np.any(self.x[self.N] != 0.0):
            raise ValueError("site 0 must be pinned at the origin")

    @property
    def d(self):
        return self.x.shape[1]

    @classmethod
    def zeros(cls, eps, N, d):
        return cls(eps=eps, N=N, x=np.zeros((2 * N + 1, d)))

    @classmethod
    def free_sample(cls, eps, N, d, rng):
        """Exact draw from the free (W=0, kappa=0) pinned law: two
        independent random walks with N(0, eps I) increments out of site 0."""
        x = np.zeros((2 * N + 1, d))
        steps = math.sqrt(eps) * rng.standard_normal((2 * N, d))
        x[N + 1 :] = np.cumsum(steps[:N], axis=0)
        x[N - 1 :: -1] = np.cumsum(steps[N:], axis=0)
        return cls(eps=eps, N=N, x=x)


def free_sites(N):
    """Site labels in flat order (-N..-1, 1..N)."""
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


@dataclass
class LatticeModel:
    """Immutable problem description: kernel (None = free), eps, N, kappa.

    t_cut defaults to the kernel's cutoff; J = ceil(t_cut/eps) lag cells
    enter the pair sum. use_tables selects interpolated kernel lookups
    (fast path, matches the sampler) versus direct quadrature (smooth path
    for derivative checks).
    """

    kernel: PairKernel | None
    eps: float
    N: int
    kappa: float
    t_cut: float | None = None
    use_tables: bool = True
    J: int = field(init=False)
    T: float = field(init=False)

    def __post_init__(self):
        if self.eps <= 0 or self.N < 1 or self.kappa < 0:
            raise ValueError("need eps > 0, N >= 1, kappa >= 0")
        if self.kernel is None:
            self.t_cut = 0.0
            self.J = 0
        else:
            if self.t_cut is None:
                self.t_cut = float(self.kernel.t_cut)
            self.J = min(2 * self.N, max(1, math.ceil(self.t_cut / self.eps - 1e-9)))
        self.T = self.eps * self.N

    @property
    def d(self):
        return self.kernel.d if self.kernel is not None else None

    def _w_lag(self, j, r):
        """W(|r|, eps*j) for an array of radii at one lag."""
        if self.use_tables:
            return self.kernel.w(r, self.eps * j)
        return _kernel.eval_w_many(self.kernel.source, r, self.eps * j, rtol=_DIRECT_RTOL)

    def _a_lag(self, j, r):
        """Radial Hessian factor A(|r|, eps*j) (gradient = A * separation)."""
        if self.use_tables:
            return self.kernel.hess_ab(r, self.eps * j)[0]
        av, _ = _kernel.hess_ab_direct(self.kernel.source, r, self.eps * j, rtol=_DIRECT_RTOL)
        return av

    def lag_tables(self):
        """(w_lag, dr) for the uniform-radius fast path: w_lag[j, k] is
        W(k*dr, eps*j). Requires a for_lattice-style kernel grid."""
        pk = self.kernel
        if pk is None:
            raise ValueError("free model has no lag tables")
        rg, tg = pk.r_grid, pk.t_grid
        dr = rg[1] - rg[0]
        if not np.allclose(np.diff(rg), dr, rtol=1e-9, atol=0.0):
            raise ValueError("fast path needs a uniform r_grid (use kernel.for_lattice)")
        want = self.eps * np.arange(self.J + 1)
        if tg.size < self.J + 1 or not np.allclose(tg[: self.J + 1], want, atol=1e-9):
            raise ValueError("fast path needs t_grid = eps * (0..J) (use kernel.for_lattice)")
        w_lag = np.ascontiguousarray(pk.w_table[:, : self.J + 1].T)
        return w_lag, float(dr)


def _check_conforms(lm, pc):
    if pc.N != lm.N or abs(pc.eps - lm.eps) > 1e-12:
        raise ValueError("path does not conform to the model dimensions")
    if lm.kernel is not None and pc.d != lm.kernel.d:
        raise ValueError(f"path dimension {pc.d} != kernel dimension {lm.kernel.d}")


def energy_terms(lm: LatticeModel, pc: PathConfig) -> dict:
    """Decomposition {kinetic, mass, pair, tail_bound, tail_energy_bound}."""
    _check_conforms(lm, pc)
    x = pc.x
    n_sites = x.shape[0]
    kinetic = float(np.sum((x[1:] - x[:-1]) ** 2)) / (2.0 * lm.eps)
    mass = 0.5 * lm.kappa * lm.eps * float(np.sum(x * x))
    pair = 0.0
    if lm.kernel is not None:
        acc = n_sites * float(lm._w_lag(0, np.zeros(1))[0])
        for j in range(1, lm.J + 1):
            diffs = x[j:] - x[:-j]
            r = np.sqrt(np.sum(diffs * diffs, axis=1))
            acc += 2.0 * float(np.sum(lm._w_lag(j, r)))
        pair = 0.5 * lm.eps**2 * acc
    tail = lm.kernel.tail if lm.kernel is not None else 0.0
    return {
        "kinetic": kinetic,
        "mass": mass,
        "pair": pair,
        "tail_bound": tail,
        "tail_energy_bound": lm.eps**2 * n_sites**2 * tail,
    }


def energy(lm: LatticeModel, pc: PathConfig) -> float:
    t = energy_terms(lm, pc)
    return t["kinetic"] + t["mass"] + t["pair"]


def delta_energy(lm: LatticeModel, pc: PathConfig, site: int, proposal) -> float:
    """H(x') - H(x) for x' replacing x_site; O(J) kernel lookups."""
    _check_conforms(lm, pc)
    if site == 0:
        raise ValueError("site 0 is pinned and cannot move")
    if not (-lm.N <= site <= lm.N):
        raise ValueError(f"site {site} outside -N..N")
    x = pc.x
    i = site + lm.N
    old = x[i]
    new = np.asarray(proposal, dtype=float)
    if new.shape != old.shape:
        raise ValueError("proposal has wrong dimension")

    dh = 0.0
    for nb in (i - 1, i + 1):
        if 0 <= nb < x.shape[0]:
            dh += (np.sum((new - x[nb]) ** 2) - np.sum((old - x[nb]) ** 2)) / (2.0 * lm.eps)
    dh += 0.5 * lm.kappa * lm.eps * (np.sum(new**2) - np.sum(old**2))

    if lm.kernel is not None:
        lo = max(0, i - lm.J)
        hi = min(x.shape[0] - 1, i + lm.J)
        partners = np.concatenate([np.arange(lo, i), np.arange(i + 1, hi + 1)])
        if partners.size:
            lags = np.abs(partners - i)
            r_new = np.linalg.norm(x[partners] - new, axis=1)
            r_old = np.linalg.norm(x[partners] - old, axis=1)
            acc = 0.0
            for j in np.unique(lags):
                m = lags == j
                acc += float(np.sum(lm._w_lag(int(j), r_new[m]) - lm._w_lag(int(j), r_old[m])))
            dh += lm.eps**2 * acc
    return float(dh)


def grad(lm: LatticeModel, pc: PathConfig) -> np.ndarray:
    """Analytic gradient of H, shape (2N+1, d); the pinned row is zero."""
    _check_conforms(lm, pc)
    x = pc.x
    g = np.zeros_like(x)
    g[1:] += (x[1:] - x[:-1]) / lm.eps
    g[:-1] += (x[:-1] - x[1:]) / lm.eps
    g += lm.kappa * lm.eps * x
    if lm.kernel is not None:
        for j in range(1, lm.J + 1):
            diffs = x[j:] - x[:-j]
            r = np.sqrt(np.sum(diffs * diffs, axis=1))
            a = lm._a_lag(j, r)
            contrib = lm.eps**2 * a[:, None] * diffs
            g[j:] += contrib
            g[:-j] -= contrib
    g[lm.N] = 0.0
    return g


def laplacian0(N: int) -> np.ndarray:
    """Second-difference matrix on free sites (-N..-1, 1..N): Dirichlet at
    the (absent) site 0, Neumann at +-N. -laplacian0(N) is SPD."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = 2 * N
    lap = np.zeros((n, n))
    sites = free_sites(N)
    index = {s: i for i, s in enumerate(sites)}
    for s, i in index.items():
        neighbors = [s - 1, s + 1]
        deg = 0
        for nb in neighbors:
            if nb == 0:
                deg += 1  # coupling to the pinned zero value
            elif nb in index:
                deg += 1
                lap[i, index[nb]] = 1.0
        lap[i, i] = -float(deg)
    return lap


def assemble_M(lm: LatticeModel, k_pairs: np.ndarray | None,
               kappa: float | None = None, d: int | None = None) -> np.ndarray:
    """Expected-Hessian matrix on free coordinates:

        M = eps^-1 (-lap0) (x) I_d + eps^2 (diag of row sums - Kbar) + kappa eps I.

    k_pairs has shape (2N+1, 2N+1, d, d) over all site pairs including the
    pinned site (its row/column feeds the diagonal row sums; its own
    coordinates are excluded). Input must satisfy k_pairs[i,j] =
    k_pairs[j,i]^T within tolerance. None means no pair term (free model;
    d then comes from the kernel or the explicit argument).
    """
    if kappa is None:
        kappa = lm.kappa
    S = 2 * lm.N + 1
    if k_pairs is None:
        d = d if d is not None else lm.d
        if d is None:
            raise ValueError("free model: pass d explicitly")
        k_pairs = np.zeros((S, S, d, d))
    k_pairs = np.asarray(k_pairs, dtype=float)
    if k_pairs.shape[:2] != (S, S):
        raise ValueError(f"k_pairs must be ({S},{S},d,d)")
    d = k_pairs.shape[2]
    asym = np.abs(k_pairs - np.transpose(k_pairs, (1, 0, 3, 2))).max()
    scale = max(np.abs(k_pairs).max(), 1e-30)
    if asym > 1e-8 * scale:
        raise ValueError(f"k_pairs asymmetric beyond tolerance (max dev {asym:.3e})")

    free = np.concatenate([np.arange(0, lm.N), np.arange(lm.N + 1, S)])
    rowsum = k_pairs.sum(axis=1)  # includes the self and pinned terms
    n = free.size
    blocks = -(lm.eps**2) * k_pairs[np.ix_(free, free)]
    blocks[np.arange(n), np.arange(n)] += lm.eps**2 * rowsum[free]
    m_pair = blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)

    m = np.kron(-laplacian0(lm.N) / lm.eps, np.eye(d)) + m_pair
    m += kappa * lm.eps * np.eye(n * d)
    return 0.5 * (m + m.T)


def lag_table_to_pairs(lm: LatticeModel, k_lags: np.ndarray) -> np.ndarray:
    """Expand a lag table K(tau_j), shape (J+1, d, d), into the full
    (2N+1, 2N+1, d, d) pair array, zero beyond lag J."""
    k_lags = np.asarray(k_lags, dtype=float)
    S = 2 * lm.N + 1
    d = k_lags.shape[-1]
    out = np.zeros((S, S, d, d))
    jmax = min(k_lags.shape[0] - 1, S - 1)
    for j in range(jmax + 1):
        block = 0.5 * (k_lags[j] + k_lags[j].T)
        for i in range(S - j):
            out[i, i + j] = block
            out[i + j, i] = block
    return out


def reflect(pc: PathConfig) -> PathConfig:
    """Global time reflection x_j -> x_{-j}."""
    return PathConfig(eps=pc.eps, N=pc.N, x=pc.x[::-1].copy())
