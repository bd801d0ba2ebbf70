"""First- and second-order gradient machinery for the integrated-square target.

The second-order gradient is the canonical gradient of the fluctuated target
``p -> Psi((1 + eps*(p) D1_p) p)`` where ``eps*(p)`` maximizes the reference
(HAL) log-likelihood along the local path.  Its closed form needs two scalars,

    c = sum_x hal(x) D1_p(x)^2 / (1 + eps1 D1_p(x))^2
    d = sum_x p(x) D1_upd(x) D1_p(x) / c,

with ``D1_upd`` the gradient at the updated pmf.  At p = hal the whole
expression collapses to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pmf import DiscretePmf, d1, psi


class DegenerateDenominator(ValueError):
    """Some 1 + eps1*D1(x) is nonpositive; the fluctuated pmf is invalid."""


def feasible_eps_interval(d1_values: np.ndarray, probs: np.ndarray, shrink: float = 1e-9):
    """Open interval of eps keeping (1 + eps*D) positive on the carried support."""
    carried = probs > 0
    d = d1_values[carried]
    pos = d[d > 0]
    neg = d[d < 0]
    lo = float(np.max(-1.0 / pos)) if pos.size else -np.inf
    hi = float(np.min(-1.0 / neg)) if neg.size else np.inf
    return lo * (1.0 - shrink), hi * (1.0 - shrink)


def eps1_solve(
    p: DiscretePmf,
    reference: DiscretePmf,
    max_abs_eps: float | None = None,
    method: str = "score",
    tol: float = 1e-13,
) -> float:
    """MLE of eps for the path (1 + eps*D1_p) p under the reference likelihood.

    The log-likelihood eps -> sum_x ref(x) log((1 + eps D(x)) p(x)) is strictly
    concave with strictly decreasing score sum_x ref(x) D(x) / (1 + eps D(x)),
    so the default solves the score equation with safeguarded Newton (golden
    section cannot locate the flat maximum precisely enough for downstream
    derivative checks).  ``method="golden"`` uses bounded scalar maximization
    instead.
    """
    D = d1(p)
    ref = reference.probs
    lo, hi = feasible_eps_interval(D, np.maximum(p.probs, ref))
    lo, hi = max(lo, -1e6), min(hi, 1e6)
    if max_abs_eps is not None:
        lo, hi = max(lo, -max_abs_eps), min(hi, max_abs_eps)
    if lo >= hi:
        return 0.0

    def score(e: float) -> float:
        return float(np.sum(ref * D / (1.0 + e * D)))

    s_lo, s_hi = score(lo), score(hi)
    if s_lo <= 0.0:  # decreasing score: maximum at the left edge
        return lo
    if s_hi >= 0.0:
        return hi

    if method == "golden":
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(
            lambda e: -float(np.sum(ref * np.log1p(e * D))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        return float(np.clip(res.x, lo, hi))
    if method != "score":
        raise ValueError(f"unknown method {method!r}")

    # Safeguarded Newton on the monotone score; bisection fallback.
    a, b = lo, hi
    e = 0.0
    for _ in range(200):
        s = score(e)
        if abs(s) <= tol:
            return e
        if s > 0:
            a = e
        else:
            b = e
        curv = float(np.sum(ref * (D / (1.0 + e * D)) ** 2))
        step = s / curv if curv > 0 else 0.0
        e_new = e + step
        if not a < e_new < b:
            e_new = 0.5 * (a + b)
        if e_new == e:
            break
        e = e_new
    return e


@dataclass(frozen=True)
class DensityGradCtx:
    """Scalars entering the second-order gradient at a given pmf."""

    eps1: float
    c: float
    d: float
    psi: float
    p: DiscretePmf
    hal: DiscretePmf

    def __post_init__(self) -> None:
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be positive and finite, got {self.c}")
        for name in ("eps1", "d", "psi"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")


def grad_ctx(p: DiscretePmf, hal: DiscretePmf, eps1: float | None = None) -> DensityGradCtx:
    """Build the scalar context; ``eps1`` defaults to the reference MLE at p."""
    if eps1 is None:
        eps1 = eps1_solve(p, hal)
    D = d1(p)
    denom = 1.0 + eps1 * D
    if np.any(denom <= 0):
        raise DegenerateDenominator("1 + eps1*D1 must stay positive")
    c = float(np.sum(hal.probs * (D / denom) ** 2))
    p_upd = p.with_probs(denom * p.probs)
    d_upd = d1(p_upd)
    d_scalar = float(np.sum(p.probs * d_upd * D)) / c
    return DensityGradCtx(eps1=eps1, c=c, d=d_scalar, psi=psi(p), p=p, hal=hal)


def d2(p: DiscretePmf, haldensity: DiscretePmf, eps1: float) -> np.ndarray:
    """Second-order canonical gradient at p, anchored at the HAL pmf.

    Six terms: the updated first-order gradient tilted by the path factor,
    two HAL-weighted terms scaled by d, the 4*d*Psi(p) constant, and the two
    eps1-scaled centering terms.  Mean zero under p; identically zero at
    p = haldensity.
    """
    ctx = grad_ctx(p, haldensity, eps1=eps1)
    return d2_from_ctx(ctx)


def d2_from_ctx(ctx: DensityGradCtx) -> np.ndarray:
    p, hal = ctx.p.probs, ctx.hal.probs
    D = d1(ctx.p)
    denom = 1.0 + ctx.eps1 * D
    if np.any(denom <= 0):
        raise DegenerateDenominator("1 + eps1*D1 must stay positive")
    p_upd = ctx.p.with_probs(denom * p)
    d_upd = d1(p_upd)

    hal_w = hal / denom**2
    s_hal_w = float(hal_w.sum())  # reference expectation of 1/(1+eps1*D)^2
    m_upd = float(np.sum(ctx.p.probs * d_upd))

    t1 = d_upd * denom
    t2 = 2.0 * ctx.d * (hal_w - 2.0 * p * s_hal_w)
    t3 = -2.0 * ctx.d * float(np.sum(p * hal_w))
    t4 = 4.0 * ctx.d * ctx.psi * s_hal_w
    t5 = 2.0 * ctx.eps1 * p * (d_upd - 2.0 * m_upd)
    t6 = -2.0 * ctx.eps1 * float(np.sum(p * p * (d_upd - 2.0 * m_upd)))
    return t1 + t2 + t3 + t4 + t5 + t6


def psi_first_order(probs: np.ndarray, supports: np.ndarray, hal: DiscretePmf) -> float:
    """The fluctuated target Psi_n1: Psi of the reference-MLE first-order update.

    ``eps`` is re-solved at the supplied pmf, which is what makes this the
    functional whose pathwise derivative the second-order gradient represents.
    """
    p = DiscretePmf(supports=supports, probs=probs)
    eps = eps1_solve(p, hal)
    upd = p.with_probs((1.0 + eps * d1(p)) * p.probs)
    return psi(upd)
