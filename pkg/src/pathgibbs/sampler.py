"""Metropolis sampling of pinned lattice paths.

run() drives independent chains through the compiled sweep kernels, with a
burn-in phase that can autotune the single-site step to a 30-45% acceptance
band, then records observables every `thin` sweeps. Each chain owns a
Philox stream spawned from the run seed, so results are reproducible and
independent of how chains are scheduled.

batch_means / batch_means_multi turn correlated series into (value, se)
estimates; they are the statistical backend for everything downstream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _sweeps
from .lattice import LatticeModel, PathConfig

_MOVE_NAMES = ("site", "bridge", "endpoint")
_TUNE_WINDOW = 50  # sweeps between step-size adjustments during burn-in


@dataclass(frozen=True)
class Estimate:
    """A point value with a standard error."""

    value: float
    se: float

    def as_tuple(self):
        return (self.value, self.se)


def batch_means(series, n_batches=20) -> Estimate:
    """Mean and batch-means standard error of a correlated scalar series.

    The last n_batches * (len // n_batches) entries are split into equal
    batches; se = std(batch means, ddof=1) / sqrt(n_batches). Requires at
    least two points per batch.
    """
    y = np.asarray(series, dtype=float).ravel()
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    b = y.size // n_batches
    if b < 2:
        raise ValueError(f"series of length {y.size} too short for {n_batches} batches")
    used = y[y.size - n_batches * b :]
    bm = used.reshape(n_batches, b).mean(axis=1)
    return Estimate(float(used.mean()), float(bm.std(ddof=1) / np.sqrt(n_batches)))


def batch_means_multi(series, n_batches=20) -> Estimate:
    """Pooled batch-means estimate from a (n_chains, n_samples) array.

    Batches never straddle chains, so between-chain disagreement shows up
    in the spread and the error bar stays honest if mixing is marginal.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 2:
        raise ValueError("expected a (n_chains, n_samples) array")
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    b = y.shape[1] // n_batches
    if b < 2:
        raise ValueError("chains too short for the requested batch count")
    used = y[:, y.shape[1] - n_batches * b :]
    bm = used.reshape(y.shape[0], n_batches, b).mean(axis=2).ravel()
    return Estimate(float(used.mean()), float(bm.std(ddof=1) / np.sqrt(bm.size)))


@dataclass(frozen=True)
class SamplerConfig:
    """Run shape and move mix.

    n_sweeps counts measurement sweeps (after burn_in); one observable
    record is taken every `thin` sweeps. p_site/p_bridge are move-mix
    probabilities (endpoint gets the remainder). d is only consulted for
    free models, where the lattice model does not fix the dimension.
    """

    n_chains: int = 4
    n_sweeps: int = 2000
    burn_in: int = 500
    thin: int = 1
    seed: int = 0
    sigma_site: float = 0.5
    block_len: int = 32
    p_site: float = 0.6
    p_bridge: float = 0.35
    autotune: bool = True
    n_threads: int = 1
    d: int | None = None

    def __post_init__(self):
        if self.n_chains < 1 or self.n_sweeps < 0 or self.burn_in < 0:
            raise ValueError("n_chains >= 1, sweep counts >= 0")
        if self.thin < 1:
            raise ValueError("thin >= 1")
        if self.sigma_site <= 0 or self.block_len < 2:
            raise ValueError("sigma_site > 0, block_len >= 2")
        if min(self.p_site, self.p_bridge) < 0 or self.p_site + self.p_bridge > 1:
            raise ValueError("move probabilities must be nonnegative and sum to <= 1")


@dataclass
class ChainStats:
    """Measurement-phase acceptance bookkeeping (burn-in not included)."""

    proposed: np.ndarray  # (n_chains, 3) int64, move order: site, bridge, endpoint
    accepted: np.ndarray  # (n_chains, 3)
    sigma_final: np.ndarray  # (n_chains,) step size after autotune
    clamped: np.ndarray  # (n_chains,) kernel lookups clamped at the table edge
    n_recorded: int
    n_sweeps_run: int

    def acceptance_rates(self) -> dict:
        out = {}
        for m, name in enumerate(_MOVE_NAMES):
            p = int(self.proposed[:, m].sum())
            a = int(self.accepted[:, m].sum())
            out[name] = a / p if p else float("nan")
        return out


@dataclass
class SampleRun:
    """Everything a run produced: per-chain observable arrays keyed by
    name with shape (n_chains, n_records, ...), acceptance stats, and the
    final path of each chain."""

    observables: dict
    stats: ChainStats
    paths: list
    config: SamplerConfig


def sweep(lm: LatticeModel, pc: PathConfig, rng, cfg: SamplerConfig, n_sweeps=1):
    """Advance a path in place by n_sweeps sweeps with a caller-owned rng.

    Diagnostic-grade entry point (run() is the production driver): no
    burn-in, no autotune, sigma fixed at cfg.sigma_site. Returns the
    mutated path and a {move: (proposed, accepted)} delta.
    """
    d = pc.d
    if lm.d is not None and lm.d != d:
        raise ValueError(f"path dimension {d} != kernel dimension {lm.d}")
    if pc.N != lm.N:
        raise ValueError("path does not conform to the model")
    x = pc.x
    if not (x.flags.c_contiguous and x.dtype == np.float64):
        raise ValueError("path array must be contiguous float64")

    if lm.kernel is not None:
        w_lag, dr = lm.lag_tables()
        inv_dr = 1.0 / dr
        has_pair = True
    else:
        w_lag, inv_dr, has_pair = np.zeros((1, 2)), 1.0, False
    if cfg.p_bridge > 0:
        starts = _bridge_starts(lm.N, cfg.block_len)
        if starts.size == 0:
            raise ValueError("block_len too large for this lattice")
    else:
        starts = np.zeros(1, dtype=np.int64)

    prop = np.zeros(3, dtype=np.int64)
    acc = np.zeros(3, dtype=np.int64)
    clamp = np.zeros(1, dtype=np.int64)
    _sweeps.run_sweeps(
        x, n_sweeps, lm.eps, lm.kappa, cfg.p_site, cfg.p_bridge,
        cfg.sigma_site, has_pair, w_lag, inv_dr, lm.J, starts,
        np.empty((cfg.block_len, d)), np.empty(d), prop, acc, clamp, rng,
    )
    assert not x[lm.N].any(), "pinned site moved"
    delta = {name: (int(prop[m]), int(acc[m])) for m, name in enumerate(_MOVE_NAMES)}
    return pc, delta


def _bridge_starts(N, block_len):
    """Valid first block indices: the block and both anchors stay on the
    lattice and the block never covers the pinned center site."""
    left = np.arange(1, N - block_len + 1, dtype=np.int64)
    right = np.arange(N + 1, 2 * N - block_len + 1, dtype=np.int64)
    return np.concatenate([left, right])


def _resolve_dim(lm: LatticeModel, cfg: SamplerConfig) -> int:
    if lm.d is not None:
        if cfg.d is not None and cfg.d != lm.d:
            raise ValueError(f"config d={cfg.d} conflicts with kernel d={lm.d}")
        return lm.d
    if cfg.d is None:
        raise ValueError("free model: set d in the sampler config")
    return int(cfg.d)


def _run_chain(lm, cfg, d, seed_child, observables, strides, init, chain_idx):
    rng = np.random.Generator(np.random.Philox(seed_child))
    if init is None:
        pc = PathConfig.free_sample(lm.eps, lm.N, d, rng)
    else:
        pc = init(chain_idx, rng)
        if pc.N != lm.N or pc.d != d:
            raise ValueError("init path does not conform to the model")
    x = np.ascontiguousarray(pc.x, dtype=np.float64)

    if lm.kernel is not None:
        w_lag, dr = lm.lag_tables()
        inv_dr = 1.0 / dr
        has_pair = True
    else:
        w_lag = np.zeros((1, 2))
        inv_dr = 1.0
        has_pair = False

    p_bridge = cfg.p_bridge
    if p_bridge > 0:
        starts = _bridge_starts(lm.N, cfg.block_len)
        if starts.size == 0:
            raise ValueError("block_len too large for this lattice")
    else:
        starts = np.zeros(1, dtype=np.int64)

    buf = np.empty((cfg.block_len, d))
    newbuf = np.empty(d)
    prop = np.zeros(3, dtype=np.int64)
    acc = np.zeros(3, dtype=np.int64)
    clamp = np.zeros(1, dtype=np.int64)
    sigma = cfg.sigma_site

    def sweeps(n, sig):
        _sweeps.run_sweeps(
            x, n, lm.eps, lm.kappa, cfg.p_site, p_bridge, sig,
            has_pair, w_lag, inv_dr, lm.J, starts, buf, newbuf,
            prop, acc, clamp, rng,
        )

    # burn-in, optionally adjusting sigma toward the 30-45% band
    done = 0
    while done < cfg.burn_in:
        w = min(_TUNE_WINDOW, cfg.burn_in - done)
        p0, a0 = prop[0], acc[0]
        sweeps(w, sigma)
        done += w
        if cfg.autotune and prop[0] > p0:
            rate = (acc[0] - a0) / (prop[0] - p0)
            if rate > 0.45:
                sigma = min(sigma * 1.25, 1e4)
            elif rate < 0.30:
                sigma = max(sigma * 0.8, 1e-4)
    prop[:] = 0
    acc[:] = 0
    clamp[:] = 0

    n_rec = cfg.n_sweeps // cfg.thin
    store = {}
    for name, fn in observables.items():
        s = strides.get(name, 1)
        probe = np.asarray(fn(x), dtype=np.float64)
        store[name] = np.empty(((n_rec + s - 1) // s,) + probe.shape)
    for r in range(n_rec):
        sweeps(cfg.thin, sigma)
        for name, fn in observables.items():
            s = strides.get(name, 1)
            if r % s == 0:
                store[name][r // s] = fn(x)

    final = PathConfig(lm.eps, lm.N, x)
    return store, prop, acc, sigma, int(clamp[0]), final, n_rec


def run(lm: LatticeModel, cfg: SamplerConfig, observables=None, init=None,
        strides=None) -> SampleRun:
    """Sample the lattice measure; returns observables, stats, final paths.

    observables maps a name to a callable taking the (2N+1, d) coordinate
    array and returning a float or ndarray; one record per `thin` sweeps,
    except that strides[name] = k keeps only every k-th record for that
    observable. init, if given, is called as init(chain_idx, rng) and must
    return a conforming PathConfig; by default each chain starts from a
    free draw.
    """
    observables = dict(observables or {})
    strides = dict(strides or {})
    for name, s in strides.items():
        if name not in observables or int(s) < 1:
            raise ValueError(f"stride for unknown observable or < 1: {name}")
    d = _resolve_dim(lm, cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)

    def job(i):
        return _run_chain(lm, cfg, d, children[i], observables, strides, init, i)

    if cfg.n_threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_threads) as ex:
            results = list(ex.map(job, range(cfg.n_chains)))
    else:
        results = [job(i) for i in range(cfg.n_chains)]

    obs = {
        name: np.stack([res[0][name] for res in results])
        for name in observables
    }
    stats = ChainStats(
        proposed=np.stack([res[1] for res in results]),
        accepted=np.stack([res[2] for res in results]),
        sigma_final=np.array([res[3] for res in results]),
        clamped=np.array([res[4] for res in results], dtype=np.int64),
        n_recorded=results[0][6],
        n_sweeps_run=results[0][6] * cfg.thin,
    )
    return SampleRun(observables=obs, stats=stats,
                     paths=[res[5] for res in results], config=cfg)
