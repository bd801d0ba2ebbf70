"""Treatment-specific mean: first/second-order TMLE with HAL targeting."""

from .gradients import (
    DegenerateDenominator,
    Rows,
    TsmGradCtx,
    binary_d2_with_unit_factors,
    clever_covariates,
    d1_eval,
    d2_continuous,
    d2_eval_rows,
    eps1_continuous_rows,
    eps1_solve,
    eps1_solve_rows,
    extract_rows,
    grad_ctx_rows,
    pn_d1,
    pn_d2,
    pn_loglik,
    pt_d1,
    pt_d2,
    pt_loglik,
    r1_exact_tsm,
)
from .models import (
    FluctuatedModel,
    GridFunction1,
    GridFunction2,
    TsmData,
    TsmState,
    grid_fn_w,
    grid_fn_wa,
    outcome_model,
    treatment_model,
)
from .tmle import (
    IterationRecord,
    MaxIterations,
    Tsm2TmleResult,
    first_order_tmle,
    first_order_update,
    iterative_2tmle,
    offset_logistic_mle,
    second_order_update,
    target_hal,
)

__all__ = [
    "DegenerateDenominator",
    "FluctuatedModel",
    "GridFunction1",
    "GridFunction2",
    "IterationRecord",
    "MaxIterations",
    "Rows",
    "Tsm2TmleResult",
    "TsmData",
    "TsmGradCtx",
    "TsmState",
    "binary_d2_with_unit_factors",
    "clever_covariates",
    "d1_eval",
    "d2_continuous",
    "d2_eval_rows",
    "eps1_continuous_rows",
    "eps1_solve",
    "eps1_solve_rows",
    "extract_rows",
    "first_order_tmle",
    "first_order_update",
    "grad_ctx_rows",
    "grid_fn_w",
    "grid_fn_wa",
    "iterative_2tmle",
    "offset_logistic_mle",
    "outcome_model",
    "pn_d1",
    "pn_d2",
    "pn_loglik",
    "pt_d1",
    "pt_d2",
    "pt_loglik",
    "r1_exact_tsm",
    "second_order_update",
    "target_hal",
    "treatment_model",
]
