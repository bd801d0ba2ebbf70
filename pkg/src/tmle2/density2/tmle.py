"""Targeted update loops for the integrated-square-of-density estimator.

Both update flavors move along multiplicative least favorable paths:
first-order steps (1 + eps*D1)p with eps the reference-likelihood MLE
(clamped to +/-0.1 per iteration), second-order steps (1 +/- step*D2)p along
the universal path with a fixed step, the sign picked by the reference
log-likelihood.  The reference measure is the HAL pmf for regularized
updates or the empirical pmf for empirical updates; stopping is governed by
1/n thresholds on the reference score expectations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gradients import d2_from_ctx, eps1_solve, grad_ctx
from .pmf import DiscretePmf, d1, psi

MAX_ABS_EPS1 = 0.1
UNIVERSAL_STEP = 0.01


class MaxIterations(RuntimeError):
    """The alternating update loop did not reach its stopping scores."""


@dataclass(frozen=True)
class GradientEvals:
    """Per-support gradient values backing the influence-curve variance."""

    d1: np.ndarray
    d2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.d1 + self.d2


@dataclass
class TmleRecord:
    eps1: float
    eps2_steps: int
    abs_d1_score: float
    abs_d2_score: float
    ref_loglik: float
    psi_value: float


@dataclass
class TmleTrace:
    records: list[TmleRecord] = field(default_factory=list)
    converged: bool = False


def ref_loglik(reference: DiscretePmf, p: DiscretePmf) -> float:
    """Reference-weighted log-likelihood over the carried support.

    Supports where the state has zero mass contribute a constant (-inf)
    along every multiplicative path, so they are dropped; differences
    between states on the same path are unaffected.
    """
    mask = p.probs > 0
    return float(np.sum(reference.probs[mask] * np.log(p.probs[mask])))


def d1_score(reference: DiscretePmf, p: DiscretePmf) -> float:
    """Reference expectation of the first-order gradient at p."""
    return float(np.dot(reference.probs, d1(p)))


def first_order_update(
    p: DiscretePmf,
    reference: DiscretePmf,
    max_abs_eps: float = MAX_ABS_EPS1,
) -> tuple[DiscretePmf, float]:
    """One reference-MLE step along (1 + eps*D1)p, eps clamped to the box."""
    eps = eps1_solve(p, reference, max_abs_eps=max_abs_eps)
    if eps == 0.0:
        return p, 0.0
    updated = p.with_probs((1.0 + eps * d1(p)) * p.probs)
    return updated, eps


def second_order_update(
    p: DiscretePmf,
    haldensity: DiscretePmf,
    reference: DiscretePmf,
    step: float = UNIVERSAL_STEP,
    tol: float = 1e-3,
    max_steps: int = 100_000,
) -> tuple[DiscretePmf, int]:
    """Universal-path second-order update.

    Repeats p <- (1 +/- step*D2_p) p, re-deriving D2 at each step, choosing
    the sign that increases the reference log-likelihood, until the
    reference expectation of D2 falls below ``tol`` or no step improves the
    likelihood.  Skipped entirely when already below ``tol``.
    """
    current = p
    ll = ref_loglik(reference, current)
    for taken in range(max_steps):
        ctx = grad_ctx(current, haldensity)
        D2 = d2_from_ctx(ctx)
        score = float(np.dot(reference.probs, D2))
        if abs(score) < tol:
            return current, taken
        candidates = []
        for sign in (1.0, -1.0):
            factor = 1.0 + sign * step * D2
            if np.any(factor[current.probs > 0] <= 0):
                continue
            cand = current.with_probs(factor * current.probs)
            candidates.append((ref_loglik(reference, cand), cand))
        if not candidates:
            return current, taken
        best_ll, best = max(candidates, key=lambda t: t[0])
        if best_ll <= ll:
            return current, taken
        current, ll = best, best_ll
    raise MaxIterations(f"universal path did not settle in {max_steps} steps")


@dataclass(frozen=True)
class DensityTmleResult:
    estimate: float
    final: DiscretePmf
    gradients: GradientEvals
    trace: TmleTrace


def iterate_2tmle(
    p0: DiscretePmf,
    haldensity: DiscretePmf,
    reference: DiscretePmf,
    tol: float,
    step: float = UNIVERSAL_STEP,
    max_abs_eps: float = MAX_ABS_EPS1,
    max_iter: int = 500,
) -> DensityTmleResult:
    """Alternate second- and first-order updates until both scores pass ``tol``.

    ``reference`` is the HAL pmf for regularized updates or the empirical pmf
    for empirical ones; ``haldensity`` anchors the second-order gradient in
    both cases.  Gradient evaluations for inference are taken at the final
    states: D1 at the last first-order update, D2 at the last second-order
    update.
    """
    trace = TmleTrace()
    current = p0
    d2_state = p0
    for _ in range(max_iter):
        current, steps2 = second_order_update(
            current, haldensity, reference, step=step, tol=tol
        )
        d2_state = current
        s1 = d1_score(reference, current)
        if abs(s1) >= tol:
            current, eps1 = first_order_update(current, reference, max_abs_eps=max_abs_eps)
        else:
            eps1 = 0.0
        ctx = grad_ctx(current, haldensity)
        s2_now = float(np.dot(reference.probs, d2_from_ctx(ctx)))
        s1_now = d1_score(reference, current)
        trace.records.append(
            TmleRecord(
                eps1=eps1,
                eps2_steps=steps2,
                abs_d1_score=abs(s1_now),
                abs_d2_score=abs(s2_now),
                ref_loglik=ref_loglik(reference, current),
                psi_value=psi(current),
            )
        )
        if abs(s1_now) < tol and abs(s2_now) < tol:
            trace.converged = True
            break
    else:
        raise MaxIterations(
            f"no convergence in {max_iter} iterations "
            f"(|D1 score|={trace.records[-1].abs_d1_score:.3e}, "
            f"|D2 score|={trace.records[-1].abs_d2_score:.3e})"
        )

    grads = GradientEvals(
        d1=d1(current),
        d2=d2_from_ctx(grad_ctx(d2_state, haldensity)),
    )
    return DensityTmleResult(
        estimate=psi(current), final=current, gradients=grads, trace=trace
    )


def first_order_tmle(
    p0: DiscretePmf,
    reference: DiscretePmf,
    tol: float,
    max_abs_eps: float = MAX_ABS_EPS1,
    max_iter: int = 500,
) -> tuple[DiscretePmf, TmleTrace]:
    """Plain first-order TMLE: iterate clamped MLE steps until |score| < tol."""
    trace = TmleTrace()
    current = p0
    for _ in range(max_iter):
        if abs(d1_score(reference, current)) < tol:
            trace.converged = True
            break
        current, eps1 = first_order_update(current, reference, max_abs_eps=max_abs_eps)
        trace.records.append(
            TmleRecord(
                eps1=eps1,
                eps2_steps=0,
                abs_d1_score=abs(d1_score(reference, current)),
                abs_d2_score=np.nan,
                ref_loglik=ref_loglik(reference, current),
                psi_value=psi(current),
            )
        )
        if eps1 == 0.0 and not trace.converged:
            # clamped to a fixed point without reaching tol: cannot improve
            break
    else:
        raise MaxIterations(f"first-order TMLE: no convergence in {max_iter} iterations")
    return current, trace
