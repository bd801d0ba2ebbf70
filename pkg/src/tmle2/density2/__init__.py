"""Nonparametric estimation of the integrated square of a discrete density."""

from .gradients import (
    DegenerateDenominator,
    DensityGradCtx,
    d2,
    d2_from_ctx,
    eps1_solve,
    feasible_eps_interval,
    grad_ctx,
    psi_first_order,
)
from .pmf import DiscretePmf, InvalidPmf, SupportMismatch, d1, empirical_pmf, psi, r1_exact
from .tmle import (
    DensityTmleResult,
    GradientEvals,
    MaxIterations,
    TmleRecord,
    TmleTrace,
    d1_score,
    first_order_tmle,
    first_order_update,
    iterate_2tmle,
    ref_loglik,
    second_order_update,
)

__all__ = [
    "DegenerateDenominator",
    "DensityGradCtx",
    "DensityTmleResult",
    "DiscretePmf",
    "GradientEvals",
    "InvalidPmf",
    "MaxIterations",
    "SupportMismatch",
    "TmleRecord",
    "TmleTrace",
    "d1",
    "d1_score",
    "d2",
    "d2_from_ctx",
    "empirical_pmf",
    "eps1_solve",
    "feasible_eps_interval",
    "first_order_tmle",
    "first_order_update",
    "grad_ctx",
    "iterate_2tmle",
    "psi",
    "psi_first_order",
    "r1_exact",
    "ref_loglik",
    "second_order_update",
]
