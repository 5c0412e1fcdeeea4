"""Path-measure toolkit: pair kernels from spectral densities, pinned
lattice Gibbs sampling, diffusion/CLT estimators, and variance bounds.

The layering is strictly one-way:

    spectral -> kernel -> lattice -> sampler -> estimators
    fieldmodes (Gaussian linearization) and kvoracle (finite-chain CLT
    mechanics) are self-contained; cli wires everything to config files.
"""

from .estimators import (
    BoundReport,
    MsdCurve,
    VarianceBound,
    brascamp_check,
    compute_D0,
    estimate_K,
    fit_D,
    gaussianity,
    lower_bound_c0,
    msd,
    sandwich_report,
)
from .kernel import PairKernel, envelope, eval_w, for_lattice, hessian_w, tabulate
from .kvoracle import ReversibleChain, clt_check, kv_sigma2, martingale_residual, simulate_additive
from .lattice import LatticeModel, PathConfig, assemble_M, energy, laplacian0
from .sampler import ChainStats, Estimate, SampleRun, SamplerConfig, batch_means, run, sweep
from .spectral import SpectralDensity, ValidationReport, validate

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "ChainStats", "Estimate", "LatticeModel", "MsdCurve",
    "PairKernel", "PathConfig", "ReversibleChain", "SampleRun",
    "SamplerConfig", "SpectralDensity", "ValidationReport", "VarianceBound",
    "assemble_M", "batch_means", "brascamp_check", "clt_check", "compute_D0",
    "envelope", "estimate_K", "eval_w", "fit_D", "for_lattice", "gaussianity",
    "hessian_w", "kv_sigma2", "laplacian0", "lower_bound_c0",
    "martingale_residual", "msd", "run", "sandwich_report",
    "simulate_additive", "sweep", "tabulate", "energy", "validate",
    "__version__",
]
