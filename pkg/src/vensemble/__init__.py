"""Variance estimation for subsampled ensembles viewed as U- and V-statistics."""

from .data_model import (
    DataError,
    Dataset,
    InclusionMatrix,
    Method,
    Mode,
    SubsamplePlan,
    Task,
    VarianceReport,
    inclusion_counts,
    load_csv,
    load_points,
    write_csv,
)
from .ensemble import EnsembleFit, evaluate_point, fit_ensemble, load_ensemble, save_ensemble
from .learners import KernelKind, KernelSpec, TreeParams, fit_kernel, predict_kernel
from .rng import SeedSpec
from .sampling import PlanError, draw_balanced, draw_im_plan, draw_plan
from .stats import coverage, empirical_variance, normality_test, variance_ratio
from .variance import (
    EstimatorError,
    bm_estimate,
    confidence_interval,
    corrected_ij,
    corrected_u,
    corrected_v,
    corrected_v_simplified,
    estimate,
    ij_estimate,
    im_estimate,
    total_variance,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Dataset",
    "EnsembleFit",
    "EstimatorError",
    "InclusionMatrix",
    "KernelKind",
    "KernelSpec",
    "Method",
    "Mode",
    "PlanError",
    "SeedSpec",
    "SubsamplePlan",
    "Task",
    "TreeParams",
    "VarianceReport",
    "bm_estimate",
    "confidence_interval",
    "corrected_ij",
    "corrected_u",
    "corrected_v",
    "corrected_v_simplified",
    "coverage",
    "draw_balanced",
    "draw_im_plan",
    "draw_plan",
    "empirical_variance",
    "estimate",
    "evaluate_point",
    "fit_ensemble",
    "fit_kernel",
    "ij_estimate",
    "im_estimate",
    "inclusion_counts",
    "load_csv",
    "load_ensemble",
    "load_points",
    "normality_test",
    "predict_kernel",
    "save_ensemble",
    "total_variance",
    "variance_ratio",
    "write_csv",
]
