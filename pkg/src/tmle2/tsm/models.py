"""Model objects for the treatment-specific-mean estimator.

A state bundles the fixed empirical covariate marginal with two conditional
models: gbar for P(A=1|W) and qbar for P(Y=1|W,A).  Each model is a base
predictor plus a stack of logistic fluctuations whose covariates are frozen
at fit time (they are plain grid-backed functions, never live references to
other models, so stacks cannot form cycles and evaluation cost stays flat).

Treatment-model callables take (w); outcome-model callables take (w, a).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logit

G_BOUNDS = (0.005, 0.995)
Q_BOUNDS = (1e-6, 1.0 - 1e-6)


@dataclass(frozen=True)
class GridFunction1:
    """Piecewise-constant function of w anchored at sorted grid points."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, w) -> np.ndarray:
        pos = np.clip(np.searchsorted(self.grid, np.asarray(w, dtype=float), side="right") - 1, 0, None)
        return self.values[pos]


@dataclass(frozen=True)
class GridFunction2:
    """Piecewise-constant function of (w, a) with binary a."""

    grid: np.ndarray
    values: np.ndarray  # shape (m, 2): columns for a = 0, 1

    def __call__(self, w, a) -> np.ndarray:
        pos = np.clip(np.searchsorted(self.grid, np.asarray(w, dtype=float), side="right") - 1, 0, None)
        return self.values[pos, np.asarray(a, dtype=int)]


def grid_fn_w(w: np.ndarray, per_row: np.ndarray) -> GridFunction1:
    """Wrap per-row values of a w-only function into a grid function."""
    uw, first = np.unique(np.asarray(w, dtype=float), return_index=True)
    return GridFunction1(grid=uw, values=np.asarray(per_row, dtype=float)[first])


def grid_fn_wa(w: np.ndarray, per_row_a0: np.ndarray, per_row_a1: np.ndarray) -> GridFunction2:
    """Wrap per-row values at a=0 and a=1 into a grid function of (w, a)."""
    uw, first = np.unique(np.asarray(w, dtype=float), return_index=True)
    vals = np.stack(
        [np.asarray(per_row_a0, dtype=float)[first], np.asarray(per_row_a1, dtype=float)[first]],
        axis=1,
    )
    return GridFunction2(grid=uw, values=vals)


@dataclass(frozen=True)
class FluctuatedModel:
    """Base probability model plus logistic fluctuations.

    ``predict(*args) = clip(expit(logit(clip(base(*args))) + sum_j eps_j * cov_j(*args)))``
    with clipping only at the base and the final prediction.  With an empty
    stack the (clipped) base prediction is returned as-is.
    """

    base: Callable[..., np.ndarray]
    bounds: tuple[float, float]
    fluctuations: tuple = field(default=())

    def base_probs(self, *args) -> np.ndarray:
        p = np.asarray(self.base(*args), dtype=float)
        return np.clip(p, self.bounds[0], self.bounds[1])

    def logit_values(self, *args) -> np.ndarray:
        eta = logit(self.base_probs(*args))
        for cov, eps in self.fluctuations:
            if eps != 0.0:
                eta = eta + eps * np.asarray(cov(*args), dtype=float)
        return eta

    def predict(self, *args) -> np.ndarray:
        if not self.fluctuations:
            return self.base_probs(*args)
        p = expit(self.logit_values(*args))
        return np.clip(p, self.bounds[0], self.bounds[1])

    def with_fluctuation(self, cov: Callable[..., np.ndarray], eps: float) -> "FluctuatedModel":
        return FluctuatedModel(
            base=self.base, bounds=self.bounds, fluctuations=self.fluctuations + ((cov, float(eps)),)
        )


def treatment_model(fn: Callable[..., np.ndarray], bounds=G_BOUNDS) -> FluctuatedModel:
    return FluctuatedModel(base=fn, bounds=bounds)


def outcome_model(fn: Callable[..., np.ndarray], bounds=Q_BOUNDS) -> FluctuatedModel:
    return FluctuatedModel(base=fn, bounds=bounds)


@dataclass(frozen=True)
class TsmData:
    """Observed (W, A, Y) rows; Y binary by default, real in continuous mode."""

    w: np.ndarray
    a: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        a = np.asarray(self.a, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if not (w.shape == a.shape == y.shape) or w.ndim != 1:
            raise ValueError("W, A, Y must be 1-d arrays of equal length")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("A must be binary")
        if not np.any(a == 1):
            raise ValueError("need at least one treated observation")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class TsmState:
    """(q_W, gbar, qbar): the empirical W marginal is never updated."""

    qw: np.ndarray
    gbar: FluctuatedModel
    qbar: FluctuatedModel

    def replace(self, gbar: FluctuatedModel | None = None, qbar: FluctuatedModel | None = None) -> "TsmState":
        return TsmState(
            qw=self.qw,
            gbar=self.gbar if gbar is None else gbar,
            qbar=self.qbar if qbar is None else qbar,
        )
