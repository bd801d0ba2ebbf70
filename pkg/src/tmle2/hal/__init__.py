"""Highly adaptive lasso: indicator bases, the penalized logistic solver,
penalty paths with CV and undersmoothing selectors, and the hazard-based
pmf fitter."""

from .basis import (
    EmptyData,
    IndicatorBasis,
    build_basis,
    treatment_design,
    tsm_outcome_design,
    tsm_outcome_design_spec,
)
from .lasso import HalFit, NonConvergence, fit_l1_logistic, fit_l1_logistic_path, kkt_check
from .path import (
    DegenerateResponse,
    LambdaPath,
    cv_select,
    lambda_path,
    undersmooth_by_offset,
    undersmooth_by_score,
)
from .pmf import EmptySample, PmfFitter, fit_hal_pmf

__all__ = [
    "DegenerateResponse",
    "EmptyData",
    "EmptySample",
    "HalFit",
    "IndicatorBasis",
    "LambdaPath",
    "NonConvergence",
    "PmfFitter",
    "build_basis",
    "cv_select",
    "fit_hal_pmf",
    "fit_l1_logistic",
    "fit_l1_logistic_path",
    "kkt_check",
    "lambda_path",
    "treatment_design",
    "tsm_outcome_design",
    "tsm_outcome_design_spec",
    "undersmooth_by_offset",
    "undersmooth_by_score",
]
