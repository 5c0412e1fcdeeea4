"""Shared fixtures: the closed-form test density, a tabulated kernel on a
fine grid, and two small cached sampler runs reused across test modules."""

import numpy as np
import pytest

from pathgibbs import LatticeModel, SamplerConfig, SpectralDensity, for_lattice, run


@pytest.fixture(scope="session")
def tdens():
    # d=3, omega=r, rho2 = 1 on [1,2]: every moment is elementary
    return SpectralDensity(3, "power:1", "indicator", 1.0, 2.0)


@pytest.fixture(scope="session")
def tdens_half():
    return SpectralDensity(3, "power:1", "indicator", 1.0, 2.0, amp=0.5)


@pytest.fixture(scope="session")
def fine_kernel(tdens):
    return for_lattice(tdens, eps=0.25, t_cut=6.0, r_max=8.0, n_r=1601)


_KEEP_PATH = {"path": lambda x: x.copy()}


@pytest.fixture(scope="session")
def free_run16():
    """Free model, d=2, N=16: cheap equilibrium samples for MSD tests."""
    lm = LatticeModel(None, eps=0.25, N=16, kappa=0.0)
    cfg = SamplerConfig(n_chains=4, n_sweeps=3000, burn_in=500, thin=1,
                        seed=11, block_len=8, d=2)
    res = run(lm, cfg, observables=_KEEP_PATH)
    return lm, res, res.observables["path"]


@pytest.fixture(scope="session")
def gauss_run():
    """W=0 but kappa=0.5: an exactly Gaussian target with known precision."""
    lm = LatticeModel(None, eps=0.5, N=16, kappa=0.5)
    cfg = SamplerConfig(n_chains=4, n_sweeps=6000, burn_in=1000, thin=1,
                        seed=23, block_len=8, d=1)
    res = run(lm, cfg, observables=_KEEP_PATH)
    return lm, res, res.observables["path"]
