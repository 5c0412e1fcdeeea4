"""Finite-mode Ornstein-Uhlenbeck field and the Gaussian linearization identity.

A ModeSet is a finite quadrature surrogate for the field: modes m with
wavevector k_m, weight w_m, rate om_m and amplitude amp2_m define

    W_M(x, t) = -1/2 sum_m w_m amp2_m cos(k_m . x) e^{-om_m |t|} / (2 om_m),

the finite-sum analog of the pair potential. Each mode couples to a path
through an independent cosine/sine pair of scalar OU processes, so the
accumulated field coupling Z along a piecewise-constant path is centered
Gaussian with

    1/2 Var(Z) = - integral integral W_M(q_t - q_s, t - s) dt ds,

and E[exp(-Z)] = exp(Var(Z)/2). variance_functional computes the left side
in closed form on time-cell pairs; linearization_check verifies the
identity against independent 2-D quadrature and against Monte Carlo over
exactly-sampled OU cell integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import panel_nodes
from .spectral import SPHERE_AREA, SpectralDensity


@dataclass
class ModeSet:
    """Finite mode family; arrays share length M (possibly M = 0)."""

    k: np.ndarray  # (M, d)
    w: np.ndarray  # (M,) positive
    om: np.ndarray  # (M,) positive
    amp2: np.ndarray  # (M,) nonnegative

    def __post_init__(self):
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))
        self.w = np.asarray(self.w, dtype=float).ravel()
        self.om = np.asarray(self.om, dtype=float).ravel()
        self.amp2 = np.asarray(self.amp2, dtype=float).ravel()
        m = self.w.size
        if m == 0:
            self.k = self.k.reshape(0, max(self.k.shape[-1], 1))
        if not (self.k.shape[0] == m == self.om.size == self.amp2.size):
            raise ValueError("mode arrays must share length M")
        if m and (np.any(self.w <= 0) or np.any(self.om <= 0) or np.any(self.amp2 < 0)):
            raise ValueError("need w > 0, om > 0, amp2 >= 0")

    @property
    def n_modes(self):
        return self.w.size

    @property
    def d(self):
        return self.k.shape[1]


@dataclass
class DiscretePath:
    """Piecewise-constant path: position q[i] on cell [times[i], times[i+1])."""

    times: np.ndarray  # (n+1,) strictly increasing
    q: np.ndarray  # (n+1, d)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing with >= 2 entries")
        if self.q.shape[0] != self.times.size:
            raise ValueError("need one position per time point")

    @property
    def n_cells(self):
        return self.times.size - 1


def _sphere_directions(d, n_ang):
    if d == 1:
        return np.array([[1.0]])
    if d == 2:
        th = np.pi * (np.arange(n_ang) + 0.5) / n_ang
        return np.column_stack([np.cos(th), np.sin(th)])
    if d == 3:
        # Fibonacci lattice; cos is even in k so a hemispheric bias is harmless
        i = np.arange(n_ang) + 0.5
        z = 1.0 - 2.0 * i / n_ang
        phi = np.pi * (1.0 + math.sqrt(5.0)) * i
        rad = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
    raise ValueError(f"d must be 1, 2 or 3, got {d}")


def from_spectral(sd: SpectralDensity, n_radial: int, n_ang: int = 1) -> ModeSet:
    """Discretize a spectral density into n_radial * n_ang modes.

    Radial Gauss-Legendre nodes on the support carry the measure
    sigma_d s^(d-1) rho2(s); directions are a deterministic near-uniform
    sphere sample with equal weights.
    """
    nodes, weights = panel_nodes(sd.r_min, sd.r_max, 1, int(n_radial))
    dirs = _sphere_directions(sd.d, int(n_ang))
    na = dirs.shape[0]
    k = (nodes[:, None, None] * dirs[None, :, :]).reshape(-1, sd.d)
    om = np.repeat(sd.omega_fn(nodes), na)
    w = np.repeat(weights * SPHERE_AREA[sd.d] * nodes ** (sd.d - 1) / na, na)
    amp2 = np.repeat(sd.amp * sd.rho2_fn(nodes), na)
    if np.any(om <= 0):
        raise ValueError("omega must be positive at all quadrature nodes")
    return ModeSet(k=k, w=w, om=om, amp2=amp2)


def random_modes(n: int, d: int, rng: np.random.Generator) -> ModeSet:
    """Synthetic mode set for tests and the CLI's random linearization check."""
    return ModeSet(
        k=rng.normal(size=(n, d)),
        w=rng.uniform(0.2, 1.0, size=n),
        om=rng.uniform(0.4, 2.0, size=n),
        amp2=rng.uniform(0.1, 1.0, size=n),
    )


def discrete_kernel(ms: ModeSet, x, t):
    """W_M(x, t); t may be an array, x a single d-vector."""
    t = np.asarray(t, dtype=float)
    if ms.n_modes == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    x = np.asarray(x, dtype=float).ravel()
    coef = ms.w * ms.amp2 * np.cos(ms.k @ x) / (2.0 * ms.om)  # (M,)
    damp = np.exp(-np.multiply.outer(np.abs(t), ms.om))  # (..., M)
    out = -0.5 * damp @ coef
    return out if t.ndim else float(out)


def _exp_double_same(om, length):
    """Integral of e^{-om|t-s|} over a square cell of side `length` (vector in om)."""
    x = om * length
    small = x < 1e-3
    series = x * x * (0.5 - x / 6.0 + x * x / 24.0)
    return 2.0 * np.where(small, series, x + np.expm1(-x)) / (om * om)


def _exp_double_cells(om, len_i, len_j, gap):
    """Integral of e^{-om(t-s)} for s in cell i, t in cell j, gap = dist(i, j) >= 0."""
    return (
        np.expm1(-om * len_i)
        * np.expm1(-om * len_j)
        * np.exp(-om * gap)
        / (om * om)
    )


def variance_functional(ms: ModeSet, path: DiscretePath) -> float:
    """1/2 Var(Z) for the field coupling Z along the path, in closed form.

    Equals -(double time integral of W_M) and is nonnegative.
    """
    if ms.n_modes == 0:
        return 0.0
    times, q = path.times, path.q
    n = path.n_cells
    lens = np.diff(times)
    om = ms.om
    pref = ms.w * ms.amp2 / (2.0 * om)  # per-mode weight of the cos kernel
    total = np.zeros_like(om)
    for i in range(n):
        total += _exp_double_same(om, lens[i])  # cos(k.0) = 1
        for j in range(i + 1, n):
            gap = times[j] - times[i + 1]
            cosk = np.cos(ms.k @ (q[j] - q[i]))
            total += 2.0 * cosk * _exp_double_cells(om, lens[i], lens[j], gap)
    return float(0.5 * np.sum(pref * total))


def double_integral_w(ms: ModeSet, path: DiscretePath, order: int = 24) -> float:
    """Independent oracle: the double time integral of W_M(q_t - q_s, t - s)
    by Gauss-Legendre quadrature on each cell pair (triangle-reduced on the
    diagonal). Does not use the closed-form exponential cell integrals."""
    times, q = path.times, path.q
    n = path.n_cells
    total = 0.0
    for i in range(n):
        a, b = times[i], times[i + 1]
        # diagonal: 2 * int_0^L (L - v) W_M(0, v) dv
        nodes, wts = panel_nodes(0.0, b - a, 1, order)
        vals = discrete_kernel(ms, np.zeros(ms.d), nodes)
        total += 2.0 * float(np.sum(wts * ((b - a) - nodes) * vals))
        for j in range(i + 1, n):
            c, dd = times[j], times[j + 1]
            ns, ws = panel_nodes(a, b, 1, order)
            nt, wt = panel_nodes(c, dd, 1, order)
            dq = q[j] - q[i]
            vals = discrete_kernel(ms, dq, (nt[:, None] - ns[None, :]).ravel())
            total += 2.0 * float(wt @ vals.reshape(order, order) @ ws)
    return total


def sample_ou(ms: ModeSet, times, rng: np.random.Generator) -> np.ndarray:
    """Exact OU trajectories at the given times; shape (M, 2, len(times)).

    Component 0/1 are the independent cosine/sine channels; the initial
    value is stationary (variance 1/(2 om)), transitions use the exact
    mean e^{-om dt} and innovation variance (1 - e^{-2 om dt})/(2 om).
    """
    times = np.asarray(times, dtype=float).ravel()
    if times.size and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    m = ms.n_modes
    out = np.empty((m, 2, times.size))
    if times.size == 0 or m == 0:
        return out
    sig0 = np.sqrt(1.0 / (2.0 * ms.om))
    out[:, :, 0] = sig0[:, None] * rng.standard_normal((m, 2))
    for j in range(1, times.size):
        dt = times[j] - times[j - 1]
        decay = np.exp(-ms.om * dt)
        innov = np.sqrt((1.0 - decay**2) / (2.0 * ms.om))
        out[:, :, j] = decay[:, None] * out[:, :, j - 1] + innov[:, None] * rng.standard_normal((m, 2))
    return out


def _cell_integral_moments(om, length):
    """(var_I, cov_I_end, var_end) for I = int_0^L phi dt of a unit OU."""
    x = om * length
    var_end = -np.expm1(-2.0 * x) / (2.0 * om)
    small = x < 1e-2
    xs = np.where(small, x, 1.0)
    var_series = (xs**3 / 3.0 - xs**4 / 4.0 + 7.0 * xs**5 / 60.0) / om**3
    cov_series = (xs**2 / 2.0 - xs**3 / 2.0 + 7.0 * xs**4 / 24.0) / om**2
    e1 = -np.expm1(-x)  # 1 - e^-x
    e2 = -np.expm1(-2.0 * x)
    var_closed = (length - 2.0 * e1 / om + e2 / (2.0 * om)) / om**2
    cov_closed = (e1 - 0.5 * e2) / om**2
    var_i = np.where(small, var_series, var_closed)
    cov = np.where(small, cov_series, cov_closed)
    return var_i, cov, var_end


def sample_coupling(ms: ModeSet, path: DiscretePath, n_samples: int, rng: np.random.Generator):
    """Exact samples of the coupling Z along the path; shape (n_samples,).

    Per mode and channel, the pair (cell integral, cell endpoint) is drawn
    from its exact joint Gaussian law, so no time discretization error
    enters.
    """
    z = np.zeros(n_samples)
    if ms.n_modes == 0:
        return z
    lens = np.diff(path.times)
    for m in range(ms.n_modes):
        om = ms.om[m]
        coef = math.sqrt(ms.w[m] * ms.amp2[m])
        phase = path.q[:-1] @ ms.k[m]
        projs = (np.cos(phase), np.sin(phase))
        for chan in (0, 1):
            c = rng.standard_normal(n_samples) * math.sqrt(1.0 / (2.0 * om))
            for i, length in enumerate(lens):
                var_i, cov, var_end = _cell_integral_moments(om, length)
                decay = math.exp(-om * length)
                mean_i = c * (-math.expm1(-om * length) / om)
                l11 = math.sqrt(var_i)
                l21 = cov / l11 if l11 > 0 else 0.0
                l22 = math.sqrt(max(var_end - l21 * l21, 0.0))
                g1 = rng.standard_normal(n_samples)
                g2 = rng.standard_normal(n_samples)
                integral = mean_i + l11 * g1
                c = decay * c + l21 * g1 + l22 * g2
                z += coef * projs[chan][i] * integral
    return z


def linearization_check(ms: ModeSet, path: DiscretePath, n_samples: int, rng: np.random.Generator) -> dict:
    """Verify 1/2 Var(Z) = -(double integral of W_M) exactly and by MC.

    Returns {exact_gap, exact_gap_rel, mc_gap, mc_se, n_samples,
    variance_functional}. Raises when the variance is large enough that
    exp(Var/2) overflows any meaningful MC comparison.
    """
    vf = variance_functional(ms, path)
    if vf > 300.0:
        raise ValueError(
            f"variance functional {vf:.3g} too large: exp overflows; "
            "use a shorter path or smaller amplitude"
        )
    oracle = -double_integral_w(ms, path)
    exact_gap = abs(vf - oracle)
    rel = exact_gap / max(abs(vf), abs(oracle), 1e-300)
    if int(n_samples) > 1:
        z = sample_coupling(ms, path, int(n_samples), rng)
        ez = np.exp(-z)
        mc_gap = abs(float(np.mean(ez)) - math.exp(vf))
        mc_se = float(np.std(ez, ddof=1) / math.sqrt(len(ez)))
    else:
        mc_gap, mc_se = float("nan"), math.inf
    return {
        "variance_functional": vf,
        "exact_gap": exact_gap,
        "exact_gap_rel": rel,
        "mc_gap": mc_gap,
        "mc_se": mc_se,
        "n_samples": int(n_samples),
    }
