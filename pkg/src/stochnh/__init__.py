"""Stochastic non-Hermitian single-particle dynamics.

Integrates the linear prenormalized and nonlinear normalized stochastic
Schrodinger-type equations for a particle on a line, runs Monte Carlo
ensembles over Wiener paths, and cross-checks every result against
closed-form Gaussian and lattice-determinant references.
"""

from .model import (
    DerivativePoly,
    MixedDxX,
    Scalar,
    ModelSpec,
    build_model,
    deterministic_nh,
    random_dissipative,
    decompose_hermitian,
    physicality_check,
)
from .field import Grid, WaveFunction, GaussianInit, GaussianSummary, init_gaussian, summarize
from .stochastic import WienerPath, generate_path, coarsen, derive_X, seed_for_trajectory
from .steppers import TrajectoryResult, evolve_prenormalized, evolve_normalized, equivalence_check
from . import oracles
from .montecarlo import EnsembleStats, run_ensemble, diffusion_classifier

__version__ = "0.1.0"

__all__ = [
    "DerivativePoly", "MixedDxX", "Scalar", "ModelSpec", "build_model",
    "deterministic_nh", "random_dissipative", "decompose_hermitian", "physicality_check",
    "Grid", "WaveFunction", "GaussianInit", "GaussianSummary", "init_gaussian", "summarize",
    "WienerPath", "generate_path", "coarsen", "derive_X", "seed_for_trajectory",
    "TrajectoryResult", "evolve_prenormalized", "evolve_normalized", "equivalence_check",
    "oracles", "EnsembleStats", "run_ensemble", "diffusion_classifier",
]
