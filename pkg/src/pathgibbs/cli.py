"""Command-line pipelines over the library modules.

Each subcommand wires a validated config to one workflow and writes its
artifacts (canonical JSON / CSV, binary sample streams) into the output
directory. Exit code contract: 0 success, 1 configuration or validation
failure, 2 numeric or acceptance failure. Identical config and seed give
byte-identical artifacts; wall-clock provenance is quarantined in
meta.json.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import estimators as est
from . import fieldmodes, kvoracle, output, samplefile, spectral
from . import kernel as kernelmod
from . import lattice as latticemod
from . import sampler as samplermod
from .config import ConfigError, RunConfig


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        raise _UsageError(message)


class NumericFailure(Exception):
    """A computed check failed its acceptance threshold."""


# ---------------------------------------------------------------- wiring


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return RunConfig.load(args.config)


def _out_dir(args, cfg) -> Path:
    out = args.out or cfg.get_str("output", "dir", default=".")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return int(args.seed)
    return cfg.get_int("sampler", "seed", default=0)


def _spectral_density(cfg) -> spectral.SpectralDensity:
    cfg.require("spectral", "d", "omega", "rho2", "r_min", "r_max")
    return spectral.SpectralDensity(
        d=cfg.get_int("spectral", "d"),
        omega=cfg.get_str("spectral", "omega"),
        rho2=cfg.get_str("spectral", "rho2"),
        r_min=cfg.get_float("spectral", "r_min"),
        r_max=cfg.get_float("spectral", "r_max"),
        quad_nodes=cfg.get_int("spectral", "quad_nodes", default=16),
        amp=cfg.get_float("spectral", "amp", default=1.0),
    )


def _lattice_model(cfg, kernel) -> latticemod.LatticeModel:
    cfg.require("lattice", "eps", "n")
    return latticemod.LatticeModel(
        kernel=kernel,
        eps=cfg.get_float("lattice", "eps"),
        N=cfg.get_int("lattice", "n"),
        kappa=cfg.get_float("lattice", "kappa", default=0.0),
    )


def _build_model(cfg):
    """(lm, sd | None): interacting when [spectral] is present with amp>0."""
    sd = None
    kernel = None
    if cfg.has("spectral"):
        sd = _spectral_density(cfg)
        if sd.amp > 0:
            cfg.require("kernel", "t_cut")
            kernel = kernelmod.for_lattice(
                sd,
                eps=cfg.get_float("lattice", "eps"),
                t_cut=cfg.get_float("kernel", "t_cut"),
                r_max=cfg.get_float("kernel", "r_max", default=24.0),
                n_r=cfg.get_int("kernel", "n_r", default=1201),
            )
    return _lattice_model(cfg, kernel), sd


def _dimension(cfg, lm) -> int:
    if lm.d is not None:
        return lm.d
    return cfg.get_int("lattice", "d", default=1)


def _sampler_config(cfg, args, d=None) -> samplermod.SamplerConfig:
    return samplermod.SamplerConfig(
        n_chains=cfg.get_int("sampler", "n_chains", default=4),
        n_sweeps=cfg.get_int("sampler", "n_sweeps", default=2000),
        burn_in=cfg.get_int("sampler", "burn_in", default=500),
        thin=cfg.get_int("sampler", "thin", default=10),
        seed=_seed(args, cfg),
        sigma_site=cfg.get_float("sampler", "sigma_site", default=0.5),
        block_len=cfg.get_int("sampler", "block_len", default=16),
        p_site=cfg.get_float("sampler", "p_site", default=0.6),
        p_bridge=cfg.get_float("sampler", "p_bridge", default=0.35),
        autotune=cfg.get_bool("sampler", "autotune", default=True),
        n_threads=args.threads or cfg.get_int("sampler", "n_threads", default=1),
        d=d,
    )


def _gamma(cfg, d) -> np.ndarray:
    g = np.zeros(d)
    g[0] = 1.0
    got = cfg.get_floats("estimators", "gamma", default=tuple(g))
    ga = np.asarray(got, dtype=float)
    if ga.shape != (d,) or not np.linalg.norm(ga) > 0:
        raise ConfigError(f"estimators.gamma must be {d} comma-separated floats, nonzero")
    return ga


def _tail_info(lm):
    if lm.kernel is None:
        return {"t_cut": 0.0, "tail_bound": 0.0}
    return {"t_cut": lm.t_cut, "tail_bound": float(lm.kernel.tail)}


def _stamp(cfg, payload: dict) -> dict:
    return {"config_hash": cfg.hash(), **payload}


# ----------------------------------------------------------- subcommands


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    sd = _spectral_density(cfg)
    report = spectral.validate(sd)
    output.write_json(out / "validate.json", _stamp(cfg, report.as_dict()))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"validate: passed={report.passed} violations={report.violations}")
    if not report.passed:
        raise ConfigError("spectral density failed moment validation")
    return 0


def cmd_kernel_table(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    sd = _spectral_density(cfg)
    cfg.require("kernel", "t_cut")
    t_cut = cfg.get_float("kernel", "t_cut")
    r_grid = np.linspace(0.0, cfg.get_float("kernel", "r_max", default=6.0),
                         cfg.get_int("kernel", "n_r", default=61))
    t_grid = np.linspace(0.0, cfg.get_float("kernel", "t_max", default=t_cut),
                         cfg.get_int("kernel", "n_t", default=41))
    pk = kernelmod.tabulate(sd, r_grid, t_grid, t_cut)
    rr, tt = np.meshgrid(r_grid, t_grid, indexing="ij")
    output.write_csv(out / "kernel_table.csv", ["r", "t", "W", "A", "B"],
                     [rr.ravel(), tt.ravel(), pk.w_table.ravel(),
                      pk.a_table.ravel(), pk.b_table.ravel()])
    output.write_json(out / "kernel_table.json", _stamp(cfg, {
        "rows": int(rr.size), "t_cut": t_cut, "tail_bound": float(pk.tail),
    }))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"kernel-table: {rr.size} rows -> kernel_table.csv")
    return 0


def cmd_energy_audit(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    lm, _ = _build_model(cfg)
    d = _dimension(cfg, lm)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(_seed(args, cfg))))
    pc = latticemod.PathConfig.free_sample(lm.eps, lm.N, d, rng)
    terms = latticemod.energy_terms(lm, pc)
    total = terms["kinetic"] + terms["mass"] + terms["pair"]
    payload = _stamp(cfg, {k: float(v) for k, v in terms.items()})
    payload["total"] = total
    payload.update(_tail_info(lm))
    output.write_json(out / "energy_audit.json", payload)
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"energy-audit: total={total:.6g}")
    return 0


def _run_sampling(cfg, args, record_paths=True, path_stride=1):
    lm, _ = _build_model(cfg)
    d = _dimension(cfg, lm)
    scfg = _sampler_config(cfg, args, d=None if lm.d is not None else d)
    obs = {"path": lambda x: x} if record_paths else {}
    run = samplermod.run(lm, scfg, observables=obs,
                         strides={"path": path_stride} if record_paths else None)
    return lm, d, scfg, run


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    lm, d, scfg, run = _run_sampling(cfg, args)
    paths = run.observables["path"]  # (chains, recs, 2N+1, d)
    frames = np.concatenate([p for p in paths], axis=0)
    free = np.concatenate([frames[:, : lm.N], frames[:, lm.N + 1 :]], axis=1)
    n = samplefile.write_stream(out / "samples.bin", lm.eps, lm.N, d, free)
    stats = run.stats
    payload = _stamp(cfg, {
        "n_frames": n,
        "n_chains": scfg.n_chains,
        "acceptance": stats.acceptance_rates(),
        "sigma_site_final": stats.sigma_final.tolist(),
        "clamped_lookups": int(stats.clamped.sum()),
        **_tail_info(lm),
    })
    output.write_json(out / "sample_stats.json", payload)
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"sample: wrote {n} frames -> samples.bin")
    return 0


def _samples_for_estimation(cfg, args):
    """(lm, d, samples (c, n, 2N+1, d)) from a stream file or a fresh run."""
    if getattr(args, "samples", None):
        eps, N, d, frames = samplefile.read_stream(args.samples)
        lm, _ = _build_model(cfg)
        if abs(eps - lm.eps) > 1e-12 or N != lm.N or (lm.d is not None and d != lm.d):
            raise ConfigError(f"stream (eps={eps}, N={N}, d={d}) does not match "
                              f"the configured lattice")
        paths = samplefile.frames_to_paths(frames, N, d)
        return lm, d, paths[None]
    lm, d, _, run = _run_sampling(cfg, args)
    return lm, d, run.observables["path"]


def cmd_msd(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    lm, d, samples = _samples_for_estimation(cfg, args)
    gamma = _gamma(cfg, d)
    curve = est.msd(samples, gamma, lm.eps,
                    n_batches=cfg.get_int("estimators", "n_batches", default=20))
    output.write_csv(out / "msd.csv", ["lag", "msd", "se"],
                     [curve.lags, curve.values, curve.ses])
    output.write_json(out / "msd.json", _stamp(cfg, {
        "gamma": gamma.tolist(), "n_lags": int(curve.lags.size), **_tail_info(lm),
    }))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"msd: {curve.lags.size} lags -> msd.csv")
    return 0


def cmd_bound(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    path_stride = cfg.get_int("estimators", "path_stride", default=10)
    lm, d, scfg, run = _run_sampling(cfg, args, path_stride=path_stride)
    samples = run.observables["path"]
    gamma = _gamma(cfg, d)
    nb = cfg.get_int("estimators", "n_batches", default=20)
    # project first: the curve then lives on scalars, cheap to batch
    proj = np.einsum("crsd,d->crs", samples, gamma)
    curve = est.msd(proj[..., None], np.ones(1), lm.eps, n_batches=nb)
    g2 = float(gamma @ gamma)  # slope of the raw curve is g2 * gamma'D gamma
    window = (cfg.get_float("estimators", "window_lo", default=0.2 * lm.T),
              cfg.get_float("estimators", "window_hi", default=0.5 * lm.T))
    d_hat_raw = est.fit_D(curve, window)
    d_hat = samplermod.Estimate(d_hat_raw.value / g2, d_hat_raw.se / g2)
    if lm.kernel is not None:
        kbar = est.estimate_K(samples[:, ::path_stride], lm)
        d0 = est.compute_D0(kbar, lm.eps)
    else:
        d0 = 0.0
    report = est.sandwich_report(d_hat, d0, details={
        "window_lo": window[0], "window_hi": window[1],
        "gamma": gamma.tolist(),
        "n_chains": scfg.n_chains, "n_sweeps": scfg.n_sweeps,
        **_tail_info(lm),
    })
    output.write_json(out / "bound.json", _stamp(cfg, report.as_dict()))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"bound: c0={report.c0:.6g} D_hat={report.d_hat.value:.6g} "
          f"(se {report.d_hat.se:.2g}) ok={report.sandwich_ok}")
    if not report.sandwich_ok:
        raise NumericFailure("sandwich bound violated")
    return 0


def cmd_brascamp(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    path_stride = cfg.get_int("estimators", "path_stride", default=1)
    lm, d, scfg, run = _run_sampling(cfg, args, path_stride=path_stride)
    samples = run.observables["path"]
    if lm.kernel is not None:
        kbar = est.estimate_K(samples, lm)
        pairs = latticemod.lag_table_to_pairs(lm, kbar)
        m_kappa = latticemod.assemble_M(lm, pairs)
        lam = cfg.get_float("estimators", "lambda", default=0.1 * lm.kappa * lm.eps)
    else:
        m_kappa = latticemod.assemble_M(lm, None, d=d)
        lam = cfg.get_float("estimators", "lambda", default=0.0)
    n_vec = cfg.get_int("estimators", "n_vectors", default=10)
    nb = cfg.get_int("estimators", "n_batches", default=20)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence([_seed(args, cfg), 0xF0])))
    rows = []
    all_ok = True
    for i in range(n_vec):
        f = rng.standard_normal(2 * lm.N * d)
        vb = est.brascamp_check(lm, samples, m_kappa, f, lam=lam, n_batches=nb)
        rows.append({"index": i, **vb.as_dict()})
        all_ok = all_ok and vb.ok
    output.write_json(out / "brascamp.json", _stamp(cfg, {
        "lambda": lam, "ok": all_ok, "checks": rows, **_tail_info(lm),
    }))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"brascamp: {n_vec} vectors, ok={all_ok}")
    if not all_ok:
        raise NumericFailure("variance bound violated for some f")
    return 0


def cmd_linearize_check(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    n_sets = cfg.get_int("modes", "n_sets", default=20)
    n_modes = cfg.get_int("modes", "n_modes", default=8)
    n_steps = cfg.get_int("modes", "n_steps", default=16)
    n_samples = cfg.get_int("modes", "n_samples", default=0)
    t_step = cfg.get_float("modes", "t_step", default=0.25)
    d = cfg.get_int("spectral", "d", default=3)
    seed = cfg.get_int("modes", "seed", default=_seed(args, cfg))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x11])))
    rows = []
    worst = 0.0
    for i in range(n_sets):
        ms = fieldmodes.random_modes(n_modes, d, rng)
        times = t_step * np.arange(n_steps + 1)
        x = np.cumsum(rng.standard_normal((n_steps + 1, d)), axis=0) * 0.3
        x[0] = 0.0
        path = fieldmodes.DiscretePath(times, x)
        rep = fieldmodes.linearization_check(ms, path, n_samples, rng)
        worst = max(worst, abs(rep["exact_gap_rel"]))
        rows.append({"set": i, **{k: rep[k] for k in
                     ("variance_functional", "exact_gap", "exact_gap_rel")},
                     **({"mc_gap": rep["mc_gap"], "mc_se": rep["mc_se"]}
                        if n_samples else {})})
    output.write_json(out / "linearize.json", _stamp(cfg, {
        "n_sets": n_sets, "worst_gap_rel": worst, "checks": rows,
    }))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"linearize-check: worst relative gap {worst:.3e}")
    if worst > 1e-10:
        raise NumericFailure("linearization identity violated")
    return 0


def cmd_kv_check(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    cfg.require("kv", "chain_file")
    chain = kvoracle.load_chain_file(cfg.get_str("kv", "chain_file"))
    t_final = cfg.get_float("kv", "t_final", default=1e3)
    n_traj = cfg.get_int("kv", "n_traj", default=10_000)
    seed = cfg.get_int("kv", "seed", default=_seed(args, cfg))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x27])))
    s2 = kvoracle.kv_sigma2(chain)
    batch = kvoracle.simulate_additive(chain, t_final, n_traj, rng)
    emp = batch.var_over_t()
    res = kvoracle.martingale_residual(chain, t_final, n_traj, rng)
    payload = _stamp(cfg, {
        "sigma2_formula": s2,
        "sigma2_empirical": emp,
        "ratio": emp / s2 if s2 > 0 else float("nan"),
        "residual": res["residual"],
        "residual_bound": res["bound"],
    })
    output.write_json(out / "kv_check.json", payload)
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"kv-check: sigma2={s2:.6g} empirical={emp:.6g} residual={res['residual']:.3e}")
    if s2 > 0 and (abs(emp / s2 - 1.0) > 0.05 or not res["ok"]):
        raise NumericFailure("simulation disagrees with the variance formula")
    return 0


def cmd_free_suite(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    eps = cfg.get_float("lattice", "eps", default=0.25)
    N = cfg.get_int("lattice", "n", default=32)
    d = cfg.get_int("lattice", "d", default=2)
    lm = latticemod.LatticeModel(kernel=None, eps=eps, N=N, kappa=0.0)
    scfg = samplermod.SamplerConfig(
        n_chains=cfg.get_int("sampler", "n_chains", default=4),
        n_sweeps=cfg.get_int("sampler", "n_sweeps", default=4000),
        burn_in=cfg.get_int("sampler", "burn_in", default=400),
        thin=cfg.get_int("sampler", "thin", default=2),
        seed=_seed(args, cfg),
        block_len=cfg.get_int("sampler", "block_len", default=8),
        d=d,
    )
    run = samplermod.run(lm, scfg, observables={"path": lambda x: x})
    samples = run.observables["path"]
    checks = {}
    rates = run.stats.acceptance_rates()
    checks["bridge_acceptance_one"] = rates["bridge"] == 1.0
    checks["endpoint_acceptance_one"] = rates["endpoint"] == 1.0
    gamma = np.zeros(d)
    gamma[0] = 1.0
    curve = est.msd(samples, gamma, eps)
    checks["msd_zero_at_origin"] = curve.values[0] == 0.0
    dev = np.abs(curve.values[1:] - eps * np.arange(1, N + 1)) / np.where(
        curve.ses[1:] > 0, curve.ses[1:], 1.0)
    # max over N correlated lags, so one sigma beyond the per-lag 3
    checks["msd_matches_free_law_4se_max"] = bool(dev.max() <= 4.0)
    fit = est.fit_D(curve, (0.2 * lm.T, 0.5 * lm.T))
    checks["fit_D_is_one_3se"] = bool(abs(fit.value - 1.0) <= 3.0 * fit.se)
    ok = all(checks.values())
    output.write_json(out / "free_suite.json", _stamp(cfg, {
        "ok": ok, "checks": checks,
        "fit_D": fit.value, "fit_D_se": fit.se,
    }))
    output.write_meta(out, sys.argv[1:], cfg.hash())
    print(f"free-suite: ok={ok} fit_D={fit.value:.4f}+/-{fit.se:.4f}")
    if not ok:
        raise NumericFailure(f"free-model checks failed: {checks}")
    return 0


# ----------------------------------------------------------------- main


def _build_parser() -> _Parser:
    p = _Parser(prog="pathgibbs", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="path to the INI run configuration")
    p.add_argument("--out", help="output directory (default: [output].dir or .)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--threads", type=int, help="chain-level parallelism")
    sub = p.add_subparsers(dest="command", metavar="subcommand")
    cmds = {
        "validate": cmd_validate,
        "kernel-table": cmd_kernel_table,
        "energy-audit": cmd_energy_audit,
        "sample": cmd_sample,
        "msd": cmd_msd,
        "bound": cmd_bound,
        "brascamp": cmd_brascamp,
        "linearize-check": cmd_linearize_check,
        "kv-check": cmd_kv_check,
        "free-suite": cmd_free_suite,
    }
    for name, fn in cmds.items():
        sp = sub.add_parser(name, add_help=True)
        sp.set_defaults(func=fn)
        if name == "msd":
            sp.add_argument("--samples", help="read a PGS1 stream instead of sampling")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
