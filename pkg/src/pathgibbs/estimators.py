"""Sample post-processing: MSD curve and diffusion slope, Gaussianity
diagnostics, the empirical increment kernel K-bar, the constructive
constant D0 with its lower bound c0 = 1/(1+D0), and variance bounds of
Brascamp-Lieb type against the lattice Hessian model.

Sample arrays are (n_chains, n_records, 2N+1, d); a 3-D array is treated
as a single chain. Every estimator returns batch-means error bars, with
batches never straddling chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import LatticeModel
from .sampler import Estimate

_DEF_BATCHES = 20


def _as_chains(samples) -> np.ndarray:
    a = np.asarray(samples, dtype=float)
    if a.ndim == 3:
        a = a[None]
    if a.ndim != 4:
        raise ValueError("samples must be (chains, records, sites, d) or (records, sites, d)")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("empty sample array")
    return a


def _batch_rows(series, n_batches):
    """(chains, records, k) -> per-batch means (chains*n_batches, k)."""
    c, n = series.shape[:2]
    b = n // n_batches
    if b < 2:
        raise ValueError(f"{n} records is too short for {n_batches} batches")
    used = series[:, n - n_batches * b :]
    return used.reshape(c, n_batches, b, -1).mean(axis=2).reshape(c * n_batches, -1)


@dataclass
class MsdCurve:
    """Second moment of the gamma-projected displacement per lag time.

    lags[j] = eps*j; values[j] estimates <(gamma . x_j)^2> averaged over
    the two lag signs; batch_values rows are per-batch curves and carry
    the correlation structure that fit_D needs for an honest slope error.
    """

    lags: np.ndarray
    values: np.ndarray
    ses: np.ndarray
    gamma: np.ndarray
    batch_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values[0] != 0.0:
            raise ValueError("lag 0 must vanish (pinned origin)")


def msd(samples, gamma, eps, n_batches=_DEF_BATCHES) -> MsdCurve:
    """MSD curve of gamma.x with batch-means errors.

    Lag j pools (gamma.x_{+j})^2 and (gamma.x_{-j})^2 (time reflection);
    chains contribute separate batches.
    """
    a = _as_chains(samples)
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 1 or g.shape[0] != a.shape[3] or not np.linalg.norm(g) > 0:
        raise ValueError("gamma must be a nonzero d-vector")
    N = (a.shape[2] - 1) // 2
    proj = a @ g  # (c, n, 2N+1)
    sq = proj * proj
    # per-record curve over lags 0..N, signs averaged
    per = 0.5 * (sq[:, :, N:] + sq[:, :, N::-1])
    bm = _batch_rows(per, n_batches)  # (c*nb, N+1)
    values = per.reshape(-1, N + 1).mean(axis=0)
    ses = bm.std(axis=0, ddof=1) / np.sqrt(bm.shape[0])
    values[0] = 0.0
    ses[0] = 0.0
    return MsdCurve(lags=eps * np.arange(N + 1), values=values, ses=ses,
                    gamma=g, batch_values=bm)


def fit_D(curve: MsdCurve, window) -> Estimate:
    """Diffusion slope of C(t)/|gamma|^2 over the lag-time window.

    Weighted straight-line fit (intercept absorbs the short-lag offset).
    When the curve carries per-batch values the slope error comes from
    refitting each batch, which respects cross-lag correlations; the
    plain WLS error is the fallback.
    """
    t_lo, t_hi = float(window[0]), float(window[1])
    sel = (curve.lags >= t_lo) & (curve.lags <= t_hi) & (curve.lags > 0)
    if np.count_nonzero(sel) < 3:
        raise ValueError("window must contain at least 3 positive lags")
    t = curve.lags[sel]
    g2 = float(curve.gamma @ curve.gamma)
    y = curve.values[sel] / g2
    se = curve.ses[sel] / g2
    w = 1.0 / np.where(se > 0, se, np.min(se[se > 0]) if np.any(se > 0) else 1.0) ** 2

    def wslope(yv):
        tw = np.average(t, weights=w)
        yw = np.average(yv, weights=w)
        denom = np.sum(w * (t - tw) ** 2)
        return np.sum(w * (t - tw) * (yv - yw)) / denom, denom

    slope, denom = wslope(y)
    if curve.batch_values is not None:
        per = np.array([wslope(row[sel] / g2)[0] for row in curve.batch_values])
        err = float(per.std(ddof=1) / np.sqrt(per.size))
    else:
        err = float(np.sqrt(1.0 / denom))
    return Estimate(float(slope), err)


def gaussianity(samples, gamma, lag, n_batches=_DEF_BATCHES) -> Estimate:
    """Kurtosis ratio <u^4>/(3<u^2>^2) of u = gamma.x at the given lag.

    1 for a Gaussian marginal; both lag signs contribute. The moments are
    global (per-batch ratios would carry an O(1/batch) bias); the error
    bar propagates batch fluctuations of m2 and m4 through the ratio.
    """
    a = _as_chains(samples)
    g = np.asarray(gamma, dtype=float)
    N = (a.shape[2] - 1) // 2
    if not 1 <= abs(int(lag)) <= N:
        raise ValueError(f"lag must satisfy 1 <= |lag| <= {N}")
    j = abs(int(lag))
    up = a[:, :, N + j] @ g
    um = a[:, :, N - j] @ g
    m2s = 0.5 * (up * up + um * um)  # per-record, signs pooled
    m4s = 0.5 * (up ** 4 + um ** 4)
    m2, m4 = float(m2s.mean()), float(m4s.mean())
    if m2 == 0.0:
        raise ValueError("zero variance at this lag")
    ratio = m4 / (3.0 * m2 * m2)
    # delta-method error from batch fluctuations of the two moments
    b2 = _batch_rows(m2s[..., None], n_batches).ravel()
    b4 = _batch_rows(m4s[..., None], n_batches).ravel()
    lin = (b4 - m4) / (3.0 * m2 * m2) - 2.0 * m4 * (b2 - m2) / (3.0 * m2 ** 3)
    return Estimate(ratio, float(lin.std(ddof=1) / np.sqrt(lin.size)))


def estimate_K(samples, lm: LatticeModel) -> np.ndarray:
    """Empirical increment kernel K-bar, shape (J+1, d, d).

    K-bar[j] averages hessian_w(x_{i+j} - x_i, eps*j) over records and
    interior base sites (margin max(J, N//4) on both ends, emulating
    stationary increments). Result is symmetric in the matrix indices and
    even in the lag by construction.
    """
    if lm.kernel is None:
        raise ValueError("free model has no pair kernel")
    a = _as_chains(samples)
    c, n, S, d = a.shape
    N = (S - 1) // 2
    if N != lm.N or d != lm.kernel.d:
        raise ValueError("samples do not conform to the model")
    margin = max(lm.J, N // 4)
    lo, hi = margin, 2 * N - margin  # row-index range of usable base sites
    if hi - lo < lm.J + 1:
        raise ValueError("interior margin exhausts the lattice")
    flat = a.reshape(c * n, S, d)
    out = np.empty((lm.J + 1, d, d))
    eye = np.eye(d)
    for j in range(lm.J + 1):
        dx = flat[:, lo + j : hi + 1] - flat[:, lo : hi + 1 - j]
        dx = dx.reshape(-1, d)
        r = np.linalg.norm(dx, axis=1)
        av, bv = lm.kernel.hess_ab(r, lm.eps * j)
        unit = np.where(r[:, None] > 0, dx / np.where(r > 0, r, 1.0)[:, None], 0.0)
        kj = av.mean() * eye + (bv[:, None, None] * (unit[:, :, None] * unit[:, None, :])).mean(axis=0)
        out[j] = 0.5 * (kj + kj.T)
    return out


def compute_D0(kbar, eps) -> float:
    """Constructive constant D0 = 1/2 * I2 + 2 * I0 from the lag table,
    with I0 = sum_j eps*||K(t_j)|| and I2 = sum_j eps*t_j^2*||K(t_j)||
    over both lag signs (operator norm). Bounds the spectral gap loss
    K-hat(0) - K-hat(w) <= D0*w^2/(1+w^2)."""
    k = np.asarray(kbar, dtype=float)
    if k.ndim != 3 or k.shape[1] != k.shape[2]:
        raise ValueError("kbar must be a (J+1, d, d) lag table")
    norms = np.linalg.norm(k, ord=2, axis=(1, 2))
    peak = norms.max()
    if peak > 0 and norms[-1] > 0.05 * peak:
        raise ValueError("kernel tail has not decayed; extend the lag range")
    t = eps * np.arange(norms.size)
    two_sided = np.full(norms.size, 2.0)
    two_sided[0] = 1.0
    i0 = float(np.sum(two_sided * eps * norms))
    i2 = float(np.sum(two_sided * eps * t * t * norms))
    return 0.5 * i2 + 2.0 * i0


def lower_bound_c0(d0) -> float:
    """c0 = 1/(1+D0), the diffusion lower bound implied by D0."""
    if d0 < 0:
        raise ValueError("D0 must be nonnegative")
    return 1.0 / (1.0 + d0)


@dataclass
class VarianceBound:
    """One linear-statistic variance bound: MC lhs vs resolvent rhs."""

    lhs: Estimate
    rhs: float
    lam: float
    ok: bool

    def as_dict(self):
        return {"lhs": self.lhs.value, "lhs_se": self.lhs.se,
                "rhs": self.rhs, "lambda": self.lam, "ok": self.ok}


def brascamp_check(lm, samples, m_kappa, f, lam=0.0, n_batches=_DEF_BATCHES) -> VarianceBound:
    """Check <(f.x)^2> >= f^T (M+lambda)^{-1} f within 3 sigma.

    f is a coefficient vector over free sites in (site, coordinate)
    order matching the Hessian model matrix m_kappa. Gaussian models give
    equality at lambda = 0; the interacting bound holds with any
    lambda >= 0 slack on the resolvent side.
    """
    a = _as_chains(samples)
    d = a.shape[3]
    fv = np.asarray(f, dtype=float).ravel()
    if fv.size != 2 * lm.N * d:
        raise ValueError(f"f must have {2 * lm.N * d} entries")
    free = np.concatenate([a[:, :, : lm.N], a[:, :, lm.N + 1 :]], axis=2)
    s = free.reshape(a.shape[0], a.shape[1], -1) @ fv
    lhs = _pooled(s * s, n_batches)
    mat = np.asarray(m_kappa, dtype=float) + lam * np.eye(fv.size)
    try:
        g = scipy.linalg.solve(mat, fv, assume_a="sym")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ValueError(f"resolvent solve failed: {exc}") from exc
    rhs = float(fv @ g)
    ok = bool(lhs.value + 3.0 * lhs.se >= rhs)
    return VarianceBound(lhs=lhs, rhs=rhs, lam=float(lam), ok=ok)


def _pooled(series, n_batches) -> Estimate:
    bm = _batch_rows(series[..., None], n_batches).ravel()
    return Estimate(float(bm.mean()), float(bm.std(ddof=1) / np.sqrt(bm.size)))


@dataclass
class BoundReport:
    """Sandwich verdict c0 <= D-hat <= 1 with a 3 sigma tolerance."""

    d_hat: Estimate
    d0: float
    c0: float
    sandwich_ok: bool
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"D_hat": self.d_hat.value, "D_hat_se": self.d_hat.se,
                "D0": self.d0, "c0": self.c0,
                "sandwich_ok": self.sandwich_ok, **self.details}


def sandwich_report(d_hat: Estimate, d0, details=None) -> BoundReport:
    """Assemble the two-sided diffusion verdict from the slope and D0."""
    if not (np.isfinite(d_hat.value) and np.isfinite(d0)):
        raise ValueError("inputs must be finite")
    c0 = lower_bound_c0(d0)
    tol = 3.0 * d_hat.se
    ok = bool(c0 - tol <= d_hat.value <= 1.0 + tol)
    return BoundReport(d_hat=d_hat, d0=float(d0), c0=c0,
                       sandwich_ok=ok, details=dict(details or {}))
