"""Canonical gradients for the treatment-specific mean.

First order: D1(O) = A/gbar(W) * (Y - qbar(W,A)).

Second order (binary outcome): D2 = C^y(W,A)(Y - qbar) + C^a(W)(A - gbar)
with clever covariates built from the HAL pair (gtilde, qtilde), the
regularized first-order coefficient eps1 and its update qbar1, and scalars

    c1     = mean_i gtilde/gbar^2 * qbar1(1-qbar1)   (at (W_i, 1))
    ctilde = mean_i qbar1(1-qbar1)/gbar / c1.

Both covariates vanish identically at the HAL state.  All reference-measure
expectations reduce to exact averages over the observed W_i with closed-form
sums over (A, Y), never sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from ..core.rootfind import ScoreFunction1D, solve_score_1d
from .models import FluctuatedModel, TsmData, TsmState, grid_fn_w

EPS_INTERVAL = (-10.0, 10.0)


class DegenerateDenominator(ValueError):
    """A clever-covariate denominator vanished (qbar at 0 or 1)."""


@dataclass
class Rows:
    """Per-observation evaluations of a (state, hal) pair on the data.

    Logit arrays are the exact fluctuation chains; probabilities are the
    clipped inverse links, mirroring FluctuatedModel.predict.
    """

    w: np.ndarray
    a: np.ndarray
    y: np.ndarray
    lg: np.ndarray
    lq1: np.ndarray
    lq0: np.ndarray
    lgt: np.ndarray
    lqt1: np.ndarray
    lqt0: np.ndarray
    g_bounds: tuple
    q_bounds: tuple

    def copy(self) -> "Rows":
        return Rows(
            w=self.w,
            a=self.a,
            y=self.y,
            lg=self.lg.copy(),
            lq1=self.lq1.copy(),
            lq0=self.lq0.copy(),
            lgt=self.lgt.copy(),
            lqt1=self.lqt1.copy(),
            lqt0=self.lqt0.copy(),
            g_bounds=self.g_bounds,
            q_bounds=self.q_bounds,
        )

    @property
    def n(self) -> int:
        return self.w.size

    def _p(self, l: np.ndarray, bounds) -> np.ndarray:
        return np.clip(expit(l), bounds[0], bounds[1])

    @property
    def g(self) -> np.ndarray:
        return self._p(self.lg, self.g_bounds)

    @property
    def q1(self) -> np.ndarray:
        return self._p(self.lq1, self.q_bounds)

    @property
    def q0(self) -> np.ndarray:
        return self._p(self.lq0, self.q_bounds)

    @property
    def gt(self) -> np.ndarray:
        return self._p(self.lgt, self.g_bounds)

    @property
    def qt1(self) -> np.ndarray:
        return self._p(self.lqt1, self.q_bounds)

    @property
    def qt0(self) -> np.ndarray:
        return self._p(self.lqt0, self.q_bounds)

    @property
    def q_at_a(self) -> np.ndarray:
        return np.where(self.a == 1, self.q1, self.q0)


def extract_rows(state: TsmState, hal: TsmState, data: TsmData) -> Rows:
    ones = np.ones(data.n)
    zeros = np.zeros(data.n)
    return Rows(
        w=data.w,
        a=data.a,
        y=data.y,
        lg=state.gbar.logit_values(data.w),
        lq1=state.qbar.logit_values(data.w, ones),
        lq0=state.qbar.logit_values(data.w, zeros),
        lgt=hal.gbar.logit_values(data.w),
        lqt1=hal.qbar.logit_values(data.w, ones),
        lqt0=hal.qbar.logit_values(data.w, zeros),
        g_bounds=state.gbar.bounds,
        q_bounds=state.qbar.bounds,
    )


def d1_eval(state: TsmState, data: TsmData) -> np.ndarray:
    """Per-observation first-order gradient A/gbar(W) (Y - qbar(W,A))."""
    g = state.gbar.predict(data.w)
    q = state.qbar.predict(data.w, data.a)
    return data.a / g * (data.y - q)


def eps1_solve_rows(rows: Rows, mode: str, tol: float = 1e-12) -> float:
    """First-order fluctuation coefficient along the A/gbar covariate.

    Regularized mode solves the HAL-expectation score, empirical mode the
    sample score; both are strictly decreasing in eps.
    """
    g, q_at = rows.g, rows.q_at_a
    inv_g = 1.0 / g
    lo, hi = rows.q_bounds
    if mode == "regularized":
        gt, qt1 = rows.gt, rows.qt1
        ratio = gt * inv_g

        def score(e: float) -> float:
            q1e = np.clip(expit(rows.lq1 + e * inv_g), lo, hi)
            return float(np.mean(ratio * (qt1 - q1e)))

    elif mode == "empirical":
        treated = rows.a == 1

        def score(e: float) -> float:
            q1e = np.clip(expit(rows.lq1[treated] + e * inv_g[treated]), lo, hi)
            return float(np.sum((rows.y[treated] - q1e) * inv_g[treated]) / rows.n)

    else:
        raise ValueError(f"unknown mode {mode!r}")

    if score(0.0) == 0.0:
        return 0.0
    return solve_score_1d(ScoreFunction1D(score, *EPS_INTERVAL), tol=tol)


def eps1_solve(state: TsmState, hal: TsmState, mode: str, data: TsmData) -> float:
    return eps1_solve_rows(extract_rows(state, hal, data), mode)


@dataclass(frozen=True)
class TsmGradCtx:
    """Scalars and per-row pieces of the second-order clever covariates.

    ``cy1`` is C^y at (W_i, 1) (C^y vanishes at a=0) and ``ca`` is C^a(W_i).
    ``qbar1_update`` evaluates the first-order update qbar1(W, 1).
    """

    c1: float
    ctilde: float
    eps1: float
    qbar1_update: object
    q1u: np.ndarray
    cy1: np.ndarray
    ca: np.ndarray

    def __post_init__(self) -> None:
        if not (np.isfinite(self.c1) and self.c1 > 0):
            raise DegenerateDenominator(f"c1 must be positive, got {self.c1}")
        if not (np.isfinite(self.ctilde) and np.isfinite(self.eps1)):
            raise ValueError("non-finite gradient context")


def grad_ctx_rows(rows: Rows, eps1: float | None = None) -> TsmGradCtx:
    """Clever-covariate context at the current (state, hal) rows.

    ``eps1`` defaults to the regularized first-order coefficient, which is
    what the second-order gradient formula is derived at.
    """
    if eps1 is None:
        eps1 = eps1_solve_rows(rows, "regularized")
    g, q1 = rows.g, rows.q1
    gt, qt1 = rows.gt, rows.qt1
    lo, hi = rows.q_bounds
    q1u = np.clip(expit(rows.lq1 + eps1 / g), lo, hi)
    var1u = q1u * (1.0 - q1u)
    var1 = q1 * (1.0 - q1)
    if np.any(var1 <= 0) or np.any(g <= 0):
        raise DegenerateDenominator("qbar(1-qbar) or gbar vanished")
    c1 = float(np.mean(gt / g**2 * var1u))
    ctilde = float(np.mean(var1u / g)) / c1
    shrink = 1.0 - ctilde * gt / g
    cy1 = (1.0 / g) * (var1u / var1) * shrink
    ca = -eps1 * (var1u / g**2) * shrink - ctilde * (gt / g**2) * (qt1 - q1u)
    return TsmGradCtx(
        c1=c1,
        ctilde=ctilde,
        eps1=eps1,
        qbar1_update=grid_fn_w(rows.w, q1u),
        q1u=q1u,
        cy1=cy1,
        ca=ca,
    )


def clever_covariates(
    state: TsmState, hal: TsmState, ctx: TsmGradCtx, data: TsmData
) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation (C^y(W_i, A_i), C^a(W_i))."""
    return data.a * ctx.cy1, ctx.ca.copy()


def d2_eval_rows(rows: Rows, ctx: TsmGradCtx) -> np.ndarray:
    """Per-observation second-order gradient values."""
    cy = rows.a * ctx.cy1
    return cy * (rows.y - rows.q_at_a) + ctx.ca * (rows.a - rows.g)


# ---------------------------------------------------------------------------
# reference-measure expectations (exact closed-form sums over A and Y)

def pn_d1(rows: Rows) -> float:
    return float(np.mean(rows.a / rows.g * (rows.y - rows.q_at_a)))


def pt_d1(rows: Rows) -> float:
    return float(np.mean(rows.gt / rows.g * (rows.qt1 - rows.q1)))


def pn_d2(rows: Rows, ctx: TsmGradCtx) -> float:
    return float(np.mean(d2_eval_rows(rows, ctx)))


def pt_d2(rows: Rows, ctx: TsmGradCtx) -> float:
    first = np.mean(rows.gt * ctx.cy1 * (rows.qt1 - rows.q1))
    second = np.mean(ctx.ca * (rows.gt - rows.g))
    return float(first + second)


def pn_loglik(rows: Rows) -> float:
    g, q_at = rows.g, rows.q_at_a
    ll_a = np.where(rows.a == 1, np.log(g), np.log(1.0 - g))
    ll_y = rows.y * np.log(q_at) + (1.0 - rows.y) * np.log(1.0 - q_at)
    return float(np.mean(ll_a + ll_y))


def pt_loglik(rows: Rows) -> float:
    g, q1, q0 = rows.g, rows.q1, rows.q0
    gt, qt1, qt0 = rows.gt, rows.qt1, rows.qt0
    ll_a = gt * np.log(g) + (1.0 - gt) * np.log(1.0 - g)
    ll_y1 = qt1 * np.log(q1) + (1.0 - qt1) * np.log(1.0 - q1)
    ll_y0 = qt0 * np.log(q0) + (1.0 - qt0) * np.log(1.0 - q0)
    return float(np.mean(ll_a + gt * ll_y1 + (1.0 - gt) * ll_y0))


# ---------------------------------------------------------------------------
# continuous-outcome gradient (linear least-squares fluctuation)

def eps1_continuous_rows(rows: Rows) -> float:
    """Least-squares coefficient for the linear path qbar + eps*A/gbar."""
    g = rows.g
    num = float(np.mean(rows.gt / g * (rows.qt1 - rows.q1)))
    den = float(np.mean(rows.gt / g**2))
    return num / den


def d2_continuous(state: TsmState, hal: TsmState, data: TsmData, eps1: float | None = None) -> np.ndarray:
    """Second-order gradient for a continuous outcome.

    Matches the binary formula with the variance ratio and ctilde replaced
    by one (the linear path has unit derivative where the logistic path has
    qbar1(1-qbar1)).
    """
    rows = extract_rows(state, hal, data)
    if eps1 is None:
        eps1 = eps1_continuous_rows(rows)
    g, gt = rows.g, rows.gt
    q1u = rows.q1 + eps1 / g
    resid = rows.y - rows.q_at_a
    t1 = rows.a / g * (g - gt) / g * resid
    t2 = eps1 * (gt - g) / g**3 * (rows.a - g)
    t3 = -(gt / g**2) * (rows.qt1 - q1u) * (rows.a - g)
    return t1 + t2 + t3


def binary_d2_with_unit_factors(state: TsmState, hal: TsmState, data: TsmData, eps1: float) -> np.ndarray:
    """Binary-outcome D2 with ctilde and the variance factors forced to one.

    Exposes the structural correspondence with :func:`d2_continuous`;
    used by the consistency tests.
    """
    rows = extract_rows(state, hal, data)
    g, gt = rows.g, rows.gt
    q1u = rows.q1 + eps1 / g  # linear update, as in the continuous path
    shrink = 1.0 - gt / g
    cy1 = (1.0 / g) * shrink
    ca = -eps1 / g**2 * shrink - (gt / g**2) * (rows.qt1 - q1u)
    cy = rows.a * cy1
    return cy * (rows.y - rows.q_at_a) + ca * (rows.a - rows.g)


# ---------------------------------------------------------------------------
# exact first-order remainder against a known truth

def r1_exact_tsm(state: TsmState, qbar0, gbar0, marginal) -> float:
    """R1 = E0 [ (qbar1 - qbar10)(W) * (gbar - gbar0)(W)/gbar(W) ].

    ``marginal`` is ("grid", points, weights) for exact discrete-W sums or
    ("uniform", lo, hi) for adaptive quadrature.
    """

    def integrand(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        one = np.ones(w.size)
        q1 = state.qbar.predict(w, one)
        q10 = np.asarray(qbar0(w, one), dtype=float)
        g = state.gbar.predict(w)
        g0 = np.asarray(gbar0(w), dtype=float)
        return (q1 - q10) * (g - g0) / g

    kind = marginal[0]
    if kind == "grid":
        _, points, weights = marginal
        vals = integrand(np.asarray(points, dtype=float))
        return float(np.dot(np.asarray(weights, dtype=float), vals))
    if kind == "uniform":
        _, lo, hi = marginal
        value, _err = quad(lambda w: float(integrand(w)[0]), lo, hi, epsabs=1e-10, limit=200)
        return value / (hi - lo)
    raise ValueError(f"unknown marginal kind {kind!r}")
