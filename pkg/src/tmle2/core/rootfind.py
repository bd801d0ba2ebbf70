"""Bracketed root finding for one-dimensional score equations.

Fluctuation coefficients are defined as zeros of monotone-ish score maps.
Generic solvers can be unstable on these, so we use a derivative-free
scan-then-bisect strategy: a coarse grid scan locates a sign change and
bisection polishes it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ScoreRootError(RuntimeError):
    """Root search on a score function failed."""


class NoBracket(ScoreRootError):
    """No sign change found and no scan point within tolerance."""


class NonFinite(ScoreRootError):
    """Score evaluated to a non-finite value inside the search interval."""


@dataclass(frozen=True)
class ScoreFunction1D:
    """A scalar score map together with its search interval."""

    evaluate: Callable[[float], float]
    lo: float = -10.0
    hi: float = 10.0
    scan_points: int = field(default=201)

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"empty search interval [{self.lo}, {self.hi}]")
        if self.scan_points < 3:
            raise ValueError("scan needs at least 3 points")


def solve_score_1d(score: ScoreFunction1D, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Solve ``score(eps) = 0`` by coarse scan plus bisection.

    Returns an ``eps`` with ``|score(eps)| <= tol``.  Raises :class:`NoBracket`
    when the scan finds neither a sign change nor a point already within
    tolerance, and :class:`NonFinite` on non-finite score values.
    """
    grid = np.linspace(score.lo, score.hi, score.scan_points)
    values = np.array([score.evaluate(g) for g in grid], dtype=float)
    if not np.all(np.isfinite(values)):
        bad = grid[~np.isfinite(values)][0]
        raise NonFinite(f"score non-finite at eps={bad}")

    best = int(np.argmin(np.abs(values)))
    if abs(values[best]) <= tol:
        return float(grid[best])

    signs = np.sign(values)
    change = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if change.size == 0:
        raise NoBracket(
            f"no sign change on [{score.lo}, {score.hi}] "
            f"(min |score| = {abs(values[best]):.3e} > tol {tol:.1e})"
        )
    # Bracket closest to the smallest scanned |score|.
    k = change[np.argmin(np.minimum(np.abs(values[change]), np.abs(values[change + 1])))]
    a, b = float(grid[k]), float(grid[k + 1])
    fa = float(values[k])

    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = float(score.evaluate(mid))
        if not np.isfinite(fm):
            raise NonFinite(f"score non-finite at eps={mid}")
        if abs(fm) <= tol:
            return mid
        if fa * fm < 0:
            b = mid
        else:
            a, fa = mid, fm
        if b - a <= np.finfo(float).eps * max(1.0, abs(a), abs(b)):
            break

    mid = 0.5 * (a + b)
    fm = float(score.evaluate(mid))
    if abs(fm) <= tol:
        return mid
    raise ScoreRootError(
        f"bisection exhausted without reaching tol={tol:.1e} (|score|={abs(fm):.3e})"
    )
