"""Numerical laboratory for curvature-dependent surface diffusion of graphs."""
from __future__ import annotations

from .flow import (BlowUpError, CurvatureModel, check_smallness, custom_model, exponential_model,
                   linear_model, model_from_config, rhs_u, rhs_v)
from .grid import Field, GridSpec, Trajectory, build_grid
from .norms import decay_fit, scaled_norm, z_norm
from .selfsim import RampSpec, convergence_study, extract_profile, linear_profile, rescale_solution
from .semigroup import KernelTable, apply_semigroup, duhamel, kernel, kernel_profile
from .solver import SolverConfig, integrate, picard_local
from .storage import __version__

__all__ = [
    "BlowUpError", "CurvatureModel", "Field", "GridSpec", "KernelTable", "RampSpec", "SolverConfig",
    "Trajectory", "apply_semigroup", "build_grid", "check_smallness", "convergence_study", "custom_model",
    "decay_fit", "duhamel", "exponential_model", "extract_profile", "integrate", "kernel", "kernel_profile",
    "linear_model", "linear_profile", "model_from_config", "picard_local", "rescale_solution", "rhs_u",
    "rhs_v", "scaled_norm", "z_norm", "__version__",
]
