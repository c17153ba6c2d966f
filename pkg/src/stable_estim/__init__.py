"""Linear conditional-mean and dispersion-optimal estimators for bivariate SaS models."""

from __future__ import annotations

from .linear_mix import (
    LinearMixModel,
    ModelError,
    SlopeResult,
    build_model,
    conditional_mean_slope,
    error_scale,
    joint_cf,
    minimize_error_scale_numeric,
    optimal_slope,
    sample_joint,
)
from .stable_core import (
    DegenerateSampleError,
    QuadratureError,
    StableParams,
    SubordinatorParams,
    estimate_stable_params,
    positive_stable_sample,
    sas_cf,
    sas_pdf,
    sas_sample,
)
from .subgaussian import (
    SubGaussianModel,
    build_subgaussian,
    conditional_mean_slope_sg,
    conditional_residual_samples,
    error_scale_sg,
    map_estimate,
    optimal_slope_sg,
    sample_subgaussian,
)
from .validation import ValidationConfig, ValidationReport, run_validation

__version__ = "0.1.0"

__all__ = [
    "DegenerateSampleError",
    "LinearMixModel",
    "ModelError",
    "QuadratureError",
    "SlopeResult",
    "StableParams",
    "SubGaussianModel",
    "SubordinatorParams",
    "ValidationConfig",
    "ValidationReport",
    "build_model",
    "build_subgaussian",
    "conditional_mean_slope",
    "conditional_mean_slope_sg",
    "conditional_residual_samples",
    "error_scale",
    "error_scale_sg",
    "estimate_stable_params",
    "joint_cf",
    "map_estimate",
    "minimize_error_scale_numeric",
    "optimal_slope",
    "optimal_slope_sg",
    "positive_stable_sample",
    "run_validation",
    "sample_joint",
    "sample_subgaussian",
    "sas_cf",
    "sas_pdf",
    "sas_sample",
]
