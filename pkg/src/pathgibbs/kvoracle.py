"""Finite-state embodiment of the martingale CLT for additive functionals.

A reversible rate matrix Q with stationary law pi and a centered
observable V stand in for the full environment process: kv_sigma2 solves
the Poisson equation -Q u = V and returns the asymptotic variance
2 <V, u>_pi, while the simulators generate exact event-driven paths of
X_t = int V(y_s) ds to cross-check the formula, the martingale
decomposition N_t = X_t + u(y_t) - u(y_0), and approach to Gaussianity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_DB_TOL = 1e-10


@dataclass
class ReversibleChain:
    """Irreducible reversible CTMC with a centered observable.

    pi may be omitted; it is then recovered as the stationary law of Q.
    Construction validates generator shape, detailed balance, centering
    of V, and irreducibility.
    """

    q: np.ndarray
    v: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        n = self.q.shape[0]
        if self.q.shape != (n, n) or self.v.shape != (n,):
            raise ValueError("need a square Q and a matching V")
        off = self.q - np.diag(np.diag(self.q))
        if off.min() < 0:
            raise ValueError("off-diagonal rates must be nonnegative")
        if np.abs(self.q.sum(axis=1)).max() > 1e-10 * max(np.abs(self.q).max(), 1.0):
            raise ValueError("rows of Q must sum to 0")
        if not self._connected(off):
            raise ValueError("chain is reducible (multiple communicating classes)")
        if self.pi is None:
            self.pi = self._stationary()
        else:
            self.pi = np.asarray(self.pi, dtype=float)
        if self.pi.shape != (n,) or self.pi.min() <= 0 or abs(self.pi.sum() - 1) > 1e-10:
            raise ValueError("pi must be a positive probability vector")
        scale = max(np.abs(self.pi[:, None] * self.q).max(), 1e-300)
        db = np.abs(self.pi[:, None] * self.q - self.pi[None, :] * self.q.T).max()
        if db > _DB_TOL * scale:
            raise ValueError(f"detailed balance fails (max dev {db:.3e})")
        if abs(self.pi @ self.v) > 1e-10 * max(np.abs(self.v).max(), 1.0):
            raise ValueError("V must be centered under pi")

    @property
    def n(self):
        return self.q.shape[0]

    @staticmethod
    def _connected(off) -> bool:
        n = off.shape[0]
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        sym = (off > 0) | (off.T > 0)  # reversible: edges are two-way anyway
        while stack:
            i = stack.pop()
            for j in np.nonzero(sym[i])[0]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    def _stationary(self):
        n = self.q.shape[0]
        a = np.vstack([self.q.T, np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        if pi.min() <= 0:
            raise ValueError("Q has no positive stationary vector")
        return pi / pi.sum()


def random_reversible(n, rng, rate_scale=1.0) -> ReversibleChain:
    """Random irreducible reversible chain from symmetric positive edge
    weights and random masses; V is a centered random observable."""
    w = rng.uniform(0.5, 1.5, size=(n, n)) * rate_scale
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    masses = rng.uniform(0.5, 1.5, size=n)
    pi = masses / masses.sum()
    q = w / pi[:, None]
    np.fill_diagonal(q, -q.sum(axis=1))
    v = rng.standard_normal(n)
    v -= pi @ v
    return ReversibleChain(q=q, v=v, pi=pi)


def poisson_solution(chain: ReversibleChain) -> np.ndarray:
    """Centered solution u of -Q u = V (bordered system pins the mean)."""
    n = chain.n
    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = -chain.q
    a[:n, n] = 1.0
    a[n, :n] = chain.pi
    b = np.zeros(n + 1)
    b[:n] = chain.v
    sol = np.linalg.solve(a, b)
    return sol[:n]


def kv_sigma2(chain: ReversibleChain) -> float:
    """Asymptotic variance of X_t/sqrt(t): sigma^2 = 2 sum_i pi_i V_i u_i."""
    u = poisson_solution(chain)
    s2 = 2.0 * float(chain.pi @ (chain.v * u))
    # <V, (-Q)^{-1} V>_pi is a quadratic form, >= 0 up to roundoff
    if s2 < -1e-12 * max(np.abs(chain.v).max() ** 2, 1e-300):
        raise ValueError(f"negative variance {s2}; chain data inconsistent")
    return max(s2, 0.0)


@njit(cache=True, nogil=True)
def _sim_kernel(pi_cdf, rates, jump_cdf, v, t_final, n_traj, init_state, rng):
    xs = np.empty(n_traj)
    y0 = np.empty(n_traj, dtype=np.int64)
    yt = np.empty(n_traj, dtype=np.int64)
    for k in range(n_traj):
        if init_state >= 0:
            s = init_state
        else:
            u = rng.random()
            s = 0
            while pi_cdf[s] < u:
                s += 1
        y0[k] = s
        tau = 0.0
        acc = 0.0
        while True:
            r = rates[s]
            if r <= 0.0:
                acc += v[s] * (t_final - tau)
                break
            dt = -np.log(1.0 - rng.random()) / r
            if tau + dt >= t_final:
                acc += v[s] * (t_final - tau)
                break
            acc += v[s] * dt
            tau += dt
            u2 = rng.random()
            j = 0
            while jump_cdf[s, j] < u2:
                j += 1
            s = j
        xs[k] = acc
        yt[k] = s
    return xs, y0, yt


@dataclass
class TrajectoryBatch:
    """Exact-simulation output: integrals X_t plus first and last states."""

    x: np.ndarray
    y0: np.ndarray
    yt: np.ndarray
    t_final: float

    def var_over_t(self) -> float:
        return float(self.x.var(ddof=1) / self.t_final)


def simulate_additive(chain: ReversibleChain, t_final, n_traj, rng,
                      init_state=None) -> TrajectoryBatch:
    """Draw n_traj exact trajectories of X_t = int_0^t V(y_s) ds.

    Event-driven (exponential holding times, embedded jump chain), so the
    only error is statistical. init_state pins y_0; default starts from pi.
    """
    if t_final <= 0 or n_traj < 1:
        raise ValueError("need t_final > 0 and n_traj >= 1")
    rates = -np.diag(chain.q).copy()
    jump = np.where(np.eye(chain.n, dtype=bool), 0.0, chain.q)
    with np.errstate(invalid="ignore", divide="ignore"):
        jump = jump / np.where(rates > 0, rates, 1.0)[:, None]
    jump_cdf = np.cumsum(jump, axis=1)
    jump_cdf[:, -1] = 2.0  # scan guard against roundoff
    pi_cdf = np.cumsum(chain.pi)
    pi_cdf[-1] = 2.0
    init = -1 if init_state is None else int(init_state)
    if init >= chain.n:
        raise ValueError("init_state out of range")
    x, y0, yt = _sim_kernel(pi_cdf, rates, jump_cdf, chain.v,
                            float(t_final), int(n_traj), init, rng)
    return TrajectoryBatch(x=x, y0=y0, yt=yt, t_final=float(t_final))


def martingale_residual(chain: ReversibleChain, t_final, n_traj, rng) -> dict:
    """Check (1/t) E|X_t - N_t|^2 against its a priori bound.

    N_t = X_t + u(y_t) - u(y_0) is the martingale part, so the residual
    is (1/t) E|u(y_t) - u(y_0)|^2 <= 4 max_i u_i^2 / t.
    """
    u = poisson_solution(chain)
    batch = simulate_additive(chain, t_final, n_traj, rng)
    diff = u[batch.yt] - u[batch.y0]
    residual = float((diff * diff).mean() / t_final)
    bound = 4.0 * float(np.max(u * u)) / t_final
    return {"residual": residual, "bound": bound,
            "ok": bool(residual <= bound * (1 + 1e-12)), "u_max": float(np.abs(u).max())}


def clt_check(chain: ReversibleChain, t_final, n_traj, rng) -> dict:
    """Compare the law of X_t/sqrt(t) with the predicted Gaussian.

    Reports variance_ratio (empirical variance over kv_sigma2) and the
    kurtosis ratio <z^4>/(3<z^2>^2), each with an iid standard error.
    """
    s2 = kv_sigma2(chain)
    if not np.any(chain.v):
        return {"degenerate": True, "sigma2": 0.0}
    if s2 <= 0:
        raise ValueError("vanishing variance with a nonzero observable")
    batch = simulate_additive(chain, t_final, n_traj, rng)
    z = batch.x / np.sqrt(t_final)
    z2 = z * z
    m2 = float(z2.mean())
    m4 = float((z2 * z2).mean())
    n = z.size
    var_ratio = m2 / s2
    var_se = float(z2.std(ddof=1) / np.sqrt(n) / s2)
    kurt = m4 / (3 * m2 * m2)
    lin = (z2 * z2 - m4) / (3 * m2 * m2) - 2 * m4 * (z2 - m2) / (3 * m2 ** 3)
    kurt_se = float(lin.std(ddof=1) / np.sqrt(n))
    return {"degenerate": False, "sigma2": s2,
            "variance_ratio": var_ratio, "variance_ratio_se": var_se,
            "kurtosis_ratio": kurt, "kurtosis_ratio_se": kurt_se}


def load_chain_file(path) -> ReversibleChain:
    """Read a plain-text chain spec: n, then n rows of Q, then V.

    Tokens are whitespace-separated; '#' starts a comment. pi is
    recovered from Q.
    """
    tokens = []
    with open(path) as fh:
        for line in fh:
            body = line.split("#", 1)[0]
            tokens.extend(body.split())
    if not tokens:
        raise ValueError(f"{path}: empty chain file")
    try:
        n = int(tokens[0])
        vals = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed number: {exc}") from exc
    if n < 2:
        raise ValueError(f"{path}: need at least 2 states")
    want = n * n + n
    if len(vals) != want:
        raise ValueError(f"{path}: expected {want} numbers after n, got {len(vals)}")
    q = np.array(vals[: n * n]).reshape(n, n)
    v = np.array(vals[n * n :])
    return ReversibleChain(q=q, v=v)
