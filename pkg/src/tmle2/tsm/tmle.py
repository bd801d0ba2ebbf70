"""Targeted update steps and the iterative second-order TMLE loop.

The iterative estimator follows the joint-targeting recipe: per round,
(1) fluctuate the HAL pair so the empirical and HAL expectations of both
gradients agree at the current initial, (2) run a universal-path
second-order update solving the empirical D2 score, (3) apply the
closed-form empirical first-order update, and stop when the
(P_n - HAL)-score gaps for both gradients fall below the 1/n threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core.inference import CiResult, influence_ci
from ..core.rootfind import ScoreFunction1D, solve_score_1d
from .gradients import (
    Rows,
    TsmGradCtx,
    d2_eval_rows,
    eps1_solve_rows,
    extract_rows,
    grad_ctx_rows,
    pn_d1,
    pn_d2,
    pn_loglik,
    pt_d1,
    pt_d2,
    pt_loglik,
)
from .models import TsmData, TsmState, grid_fn_w, grid_fn_wa

UNIVERSAL_STEP = 0.01
SCORE_TOL = 1e-12


class MaxIterations(RuntimeError):
    """The iterative loop did not meet its stopping scores."""


def _ref_fns(mode: str):
    if mode == "regularized":
        return pt_d2, pt_loglik
    if mode == "empirical":
        return pn_d2, pn_loglik
    raise ValueError(f"unknown mode {mode!r}")


def offset_logistic_mle(
    X: np.ndarray,
    y: np.ndarray,
    offset: np.ndarray,
    tol: float = SCORE_TOL,
    max_iter: int = 200,
) -> np.ndarray:
    """Small-dimensional offset logistic MLE by damped Newton.

    Solves mean_i X_i (y_i - expit(offset_i + X_i eps)) = 0; the systems here
    are 1-3 dimensional and well conditioned, with coordinatewise bisection
    as a conceptual fallback that damping makes unnecessary in practice.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != y.size:
        X = X.T
    k = X.shape[1]
    eps = np.zeros(k)
    n = y.size

    def loglik(e):
        eta = offset + X @ e
        return float(np.mean(y * eta - np.logaddexp(0.0, eta)))

    ll = loglik(eps)
    for _ in range(max_iter):
        eta = offset + X @ eps
        mu = expit(eta)
        grad = X.T @ (y - mu) / n
        if np.max(np.abs(grad)) < tol:
            break
        v = mu * (1.0 - mu)
        hess = (X * v[:, None]).T @ X / n
        hess[np.diag_indices_from(hess)] += 1e-12
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _halving in range(40):
            cand = eps + scale * step
            ll_cand = loglik(cand)
            if ll_cand >= ll - 1e-15:
                eps, ll = cand, ll_cand
                break
            scale *= 0.5
        else:
            break
    return eps


def first_order_update(state: TsmState, hal: TsmState, mode: str, data: TsmData) -> TsmState:
    """Append the A/gbar fluctuation to qbar; gbar is never touched."""
    rows = extract_rows(state, hal, data)
    eps = eps1_solve_rows(rows, mode)
    g = rows.g
    cov = grid_fn_wa(data.w, np.zeros(data.n), 1.0 / g)
    return state.replace(qbar=state.qbar.with_fluctuation(cov, eps))


def second_order_update(
    state: TsmState,
    hal: TsmState,
    mode: str,
    method: str,
    data: TsmData,
    tol: float,
) -> TsmState:
    """Second-order update along the (C^y, C^a) fluctuation pair.

    ``onestep`` fits the two coefficients once by the mode's score equations;
    ``universal`` takes fixed small steps, re-deriving the covariates at each
    step, until the reference D2 expectation is below ``tol``.
    """
    rows = extract_rows(state, hal, data)
    if method == "onestep":
        ctx = grad_ctx_rows(rows)
        e1 = _solve_d2_eps1(rows, ctx, mode)
        e2 = _solve_d2_eps2(rows, ctx, mode)
        cov_y = grid_fn_wa(data.w, np.zeros(data.n), ctx.cy1)
        cov_a = grid_fn_w(data.w, ctx.ca)
        return state.replace(
            qbar=state.qbar.with_fluctuation(cov_y, e1),
            gbar=state.gbar.with_fluctuation(cov_a, e2),
        )
    if method == "universal":
        out, _ = _universal_d2(rows, mode, tol)
        return _wrap_state(state, out, data)
    raise ValueError(f"unknown method {method!r}")


def _solve_d2_eps1(rows: Rows, ctx: TsmGradCtx, mode: str) -> float:
    lo, hi = rows.q_bounds

    if mode == "regularized":
        weight = rows.gt * ctx.cy1
        target = rows.qt1

        def score(e):
            q1e = np.clip(expit(rows.lq1 + e * ctx.cy1), lo, hi)
            return float(np.mean(weight * (target - q1e)))

    else:
        treated = rows.a == 1
        cy = ctx.cy1[treated]

        def score(e):
            q1e = np.clip(expit(rows.lq1[treated] + e * cy), lo, hi)
            return float(np.sum(cy * (rows.y[treated] - q1e)) / rows.n)

    if score(0.0) == 0.0:
        return 0.0
    return solve_score_1d(ScoreFunction1D(score, -10.0, 10.0), tol=SCORE_TOL)


def _solve_d2_eps2(rows: Rows, ctx: TsmGradCtx, mode: str) -> float:
    glo, ghi = rows.g_bounds
    target = rows.gt if mode == "regularized" else rows.a

    def score(e):
        ge = np.clip(expit(rows.lg + e * ctx.ca), glo, ghi)
        return float(np.mean(ctx.ca * (target - ge)))

    if score(0.0) == 0.0:
        return 0.0
    return solve_score_1d(ScoreFunction1D(score, -10.0, 10.0), tol=SCORE_TOL)


def _universal_d2(
    rows: Rows,
    mode: str,
    tol: float,
    step: float = UNIVERSAL_STEP,
    max_steps: int = 100_000,
) -> tuple[Rows, TsmGradCtx]:
    """Fixed-step universal path for the D2 score; returns updated rows."""
    ref_d2, ref_ll = _ref_fns(mode)
    out = rows.copy()
    ll = ref_ll(out)
    ctx = grad_ctx_rows(out)
    for _ in range(max_steps):
        if abs(ref_d2(out, ctx)) < tol:
            return out, ctx
        best = None
        for sign in (1.0, -1.0):
            cand = out.copy()
            cand.lq1 = cand.lq1 + sign * step * ctx.cy1
            cand.lg = cand.lg + sign * step * ctx.ca
            ll_cand = ref_ll(cand)
            if best is None or ll_cand > best[0]:
                best = (ll_cand, cand)
        if best[0] <= ll:
            return out, ctx
        ll, out = best
        ctx = grad_ctx_rows(out)
    raise MaxIterations(f"universal D2 path did not settle in {max_steps} steps")


def target_hal(hal: TsmState, state: TsmState, data: TsmData) -> TsmState:
    """Fluctuate the HAL pair so empirical and HAL scores agree at ``state``.

    qtilde gets the two covariates {A/gbar, C^y}; given the update, gtilde
    gets {C^a, (qtilde*-qbar)/gbar, (qtilde*-qbar)*Cy~}; all covariates are
    frozen at the current (state, hal).  The five joint score equations then
    hold at the Newton tolerance.
    """
    rows = extract_rows(state, hal, data)
    ctx = grad_ctx_rows(rows)
    g, q1 = rows.g, rows.q1

    # outcome-side targeting: offset logistic MLE of Y on {A/gbar, C^y}
    inv_g = 1.0 / g
    Xq = np.column_stack([data.a * inv_g, data.a * ctx.cy1])
    offset_q = np.where(data.a == 1, rows.lqt1, rows.lqt0)
    eps_q = offset_logistic_mle(Xq, data.y, offset_q)
    cov_q1 = grid_fn_wa(data.w, np.zeros(data.n), inv_g)
    cov_q2 = grid_fn_wa(data.w, np.zeros(data.n), ctx.cy1)
    qtilde = hal.qbar.with_fluctuation(cov_q1, eps_q[0]).with_fluctuation(cov_q2, eps_q[1])

    # treatment-side targeting with the updated qtilde*
    lo, hi = rows.q_bounds
    qt1_star = np.clip(expit(rows.lqt1 + eps_q[0] * inv_g + eps_q[1] * ctx.cy1), lo, hi)
    dq = qt1_star - q1
    Xg = np.column_stack([ctx.ca, dq * inv_g, dq * ctx.cy1])
    eps_g = offset_logistic_mle(Xg, data.a, rows.lgt)
    gtilde = hal.gbar
    for col, e in zip(Xg.T, eps_g):
        gtilde = gtilde.with_fluctuation(grid_fn_w(data.w, col), float(e))

    return hal.replace(gbar=gtilde, qbar=qtilde)


def _wrap_state(template: TsmState, rows: Rows, data: TsmData) -> TsmState:
    """Materialize engine rows as a state with grid-backed base models."""
    gbar = template.gbar.__class__(
        base=grid_fn_w(data.w, rows.g), bounds=template.gbar.bounds
    )
    qbar = template.qbar.__class__(
        base=grid_fn_wa(data.w, rows.q0, rows.q1), bounds=template.qbar.bounds
    )
    return template.replace(gbar=gbar, qbar=qbar)


def _wrap_hal(template: TsmState, rows: Rows, data: TsmData) -> TsmState:
    """Materialize the (possibly targeted) HAL pair carried in the rows."""
    gbar = template.gbar.__class__(
        base=grid_fn_w(data.w, rows.gt), bounds=template.gbar.bounds
    )
    qbar = template.qbar.__class__(
        base=grid_fn_wa(data.w, rows.qt0, rows.qt1), bounds=template.qbar.bounds
    )
    return template.replace(gbar=gbar, qbar=qbar)


@dataclass
class IterationRecord:
    pn_d1: float
    pt_d1: float
    pn_d2: float
    pt_d2: float
    psi: float


@dataclass(frozen=True)
class Tsm2TmleResult:
    psi: float
    ci_second: CiResult
    psi_first: float
    ci_first: CiResult
    iterations: int
    records: list
    final_state: TsmState
    hal_state: TsmState
    converged: bool


def first_order_tmle(
    state: TsmState, hal: TsmState, data: TsmData, mode: str = "empirical", level: float = 0.95
) -> tuple[float, CiResult, TsmState]:
    """Plain first-order TMLE: one fluctuation of qbar, plug-in, Wald CI."""
    updated = first_order_update(state, hal, mode, data)
    q1 = updated.qbar.predict(data.w, np.ones(data.n))
    psi = float(np.mean(q1))
    g = updated.gbar.predict(data.w)
    q_at = updated.qbar.predict(data.w, data.a)
    influence = data.a / g * (data.y - q_at)
    return psi, influence_ci(psi, influence, level), updated


def iterative_2tmle(
    data: TsmData,
    initial: TsmState,
    hal: TsmState,
    tol: float | None = None,
    step: float = UNIVERSAL_STEP,
    max_iter: int = 100,
    level: float = 0.95,
) -> Tsm2TmleResult:
    """Iterative second-order TMLE with per-round HAL targeting.

    Empirical updates throughout: the universal-path D2 update solves the
    P_n D2 score, the first-order update is the standard offset logistic
    fluctuation, and the HAL pair is re-targeted at each round's initial.
    Stops when |(P_n - HAL) D1| and |(P_n - HAL) D2| are both below ``tol``
    (default 1/n) alongside the P_n score equations.
    """
    n = data.n
    if tol is None:
        tol = 1.0 / n
    rows = extract_rows(initial, hal, data)
    records: list[IterationRecord] = []
    converged = False
    rows2 = rows
    ctx2 = None

    for iteration in range(1, max_iter + 1):
        # (1) target the HAL pair at the current initial
        ctx = grad_ctx_rows(rows)
        rows = _retarget_hal_rows(rows, ctx, data)
        # (2) empirical universal-path second-order update
        rows2, ctx2 = _universal_d2(rows, "empirical", tol, step=step)
        rows = rows2.copy()
        # (3) empirical first-order update (closed-form logistic fluctuation)
        eps1 = eps1_solve_rows(rows, "empirical")
        rows.lq1 = rows.lq1 + eps1 / rows.g
        rec = IterationRecord(
            pn_d1=pn_d1(rows),
            pt_d1=pt_d1(rows),
            pn_d2=pn_d2(rows2, ctx2),
            pt_d2=pt_d2(rows2, ctx2),
            psi=float(np.mean(rows.q1)),
        )
        records.append(rec)
        if (
            abs(rec.pn_d1) < tol
            and abs(rec.pt_d1) < tol
            and abs(rec.pn_d2) < tol
            and abs(rec.pt_d2) < tol
        ):
            converged = True
            break
    if not converged:
        raise MaxIterations(
            f"iterative 2-TMLE: no convergence in {max_iter} rounds "
            f"(last record {records[-1]})"
        )

    psi = float(np.mean(rows.q1))
    influence = _second_order_influence(rows, rows2, ctx2)
    ci2 = influence_ci(psi, influence, level)
    psi1, ci1, _ = first_order_tmle(initial, hal, data, mode="empirical", level=level)
    return Tsm2TmleResult(
        psi=psi,
        ci_second=ci2,
        psi_first=psi1,
        ci_first=ci1,
        iterations=iteration,
        records=records,
        final_state=_wrap_state(initial, rows, data),
        hal_state=_wrap_hal(initial, rows, data),
        converged=converged,
    )


def _retarget_hal_rows(rows: Rows, ctx: TsmGradCtx, data: TsmData) -> Rows:
    """Engine version of :func:`target_hal`, mutating the HAL logit arrays."""
    out = rows.copy()
    g, q1 = out.g, out.q1
    inv_g = 1.0 / g
    Xq = np.column_stack([data.a * inv_g, data.a * ctx.cy1])
    offset_q = np.where(data.a == 1, out.lqt1, out.lqt0)
    eps_q = offset_logistic_mle(Xq, data.y, offset_q)
    out.lqt1 = out.lqt1 + eps_q[0] * inv_g + eps_q[1] * ctx.cy1

    lo, hi = out.q_bounds
    dq = np.clip(expit(out.lqt1), lo, hi) - q1
    Xg = np.column_stack([ctx.ca, dq * inv_g, dq * ctx.cy1])
    eps_g = offset_logistic_mle(Xg, data.a, out.lgt)
    out.lgt = out.lgt + Xg @ eps_g
    return out


def _second_order_influence(rows: Rows, rows2: Rows, ctx2: TsmGradCtx) -> np.ndarray:
    """Estimated influence curve D1 + D2.

    D2 is evaluated at the second-order update (with its covariates frozen
    there), D1 at the final first-order update, so the variance reflects the
    expansion through second order.
    """
    d2_vals = d2_eval_rows(rows2, ctx2)
    d1_vals = rows.a / rows.g * (rows.y - rows.q_at_a)
    return d1_vals + d2_vals
