"""Penalty grids, cross-validation selection, and undersmoothing selectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from ..core.rng import derive_rng
from .lasso import (
    _Design,
    _intercept_only,
    _normalize_inputs,
    fit_l1_logistic,
    fit_l1_logistic_path,
)

PATH_LENGTH = 100
MIN_RATIO = 1e-4


class DegenerateResponse(ValueError):
    """Constant response: no penalized signal, lambda_max undefined."""


@dataclass(frozen=True)
class LambdaPath:
    """Decreasing penalty grid; ``cv_index`` is set by the CV selector."""

    values: np.ndarray
    cv_index: int | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0 or np.any(vals <= 0) or np.any(np.diff(vals) >= 0):
            raise ValueError("path must be strictly decreasing and positive")
        object.__setattr__(self, "values", vals)

    def with_cv_index(self, index: int) -> "LambdaPath":
        if not 0 <= index < self.values.size:
            raise ValueError("cv index out of range")
        return LambdaPath(values=self.values, cv_index=index)


def lambda_path(
    X,
    y,
    weights=None,
    offset=None,
    length: int = PATH_LENGTH,
    min_ratio: float | None = None,
) -> LambdaPath:
    """Geometric grid from the smallest all-zero penalty down to a fraction.

    ``lambda_max`` is the largest absolute penalized score at the
    intercept-only fit (where the zero solution is stationary).  The bottom
    of the grid defaults to 1e-4 of lambda_max when there are more rows than
    columns and 0.01 otherwise: with more columns than rows the deep tail is
    fully saturated and numerically degenerate.
    """
    design, yv, w, off = _normalize_inputs(X, y, weights, offset)
    if np.min(yv) == np.max(yv):
        raise DegenerateResponse("response is constant")
    b0 = _intercept_only(yv, w, off)
    mu = expit(off + b0)
    lam_max = float(np.max(np.abs(design.gradient(w * (yv - mu)))))
    if lam_max <= 0:
        raise DegenerateResponse("all penalized scores vanish at the intercept-only fit")
    lam_max *= 1.0 + 1e-6  # keep the first fit exactly at the zero solution
    if min_ratio is None:
        min_ratio = MIN_RATIO if design.n > design.p else 0.01
    values = np.geomspace(lam_max, min_ratio * lam_max, length)
    return LambdaPath(values=values)


def _fold_assignments(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic fold labels; stratified on the response when binary."""
    rng = derive_rng(seed, 0xCF)
    n = y.size
    labels = np.empty(n, dtype=int)
    is_binary = np.all((y == 0) | (y == 1))
    if is_binary:
        for cls in (0, 1):
            idx = np.nonzero(y == cls)[0]
            perm = rng.permutation(idx)
            labels[perm] = np.arange(perm.size) % folds
    else:
        perm = rng.permutation(n)
        labels[perm] = np.arange(n) % folds
    return labels


def cv_select(
    X,
    y,
    path: LambdaPath,
    weights=None,
    offset=None,
    folds: int = 10,
    seed: int = 0,
    max_sweeps: int = 20_000,
    patience: int = 15,
) -> LambdaPath:
    """K-fold selector: index minimizing mean held-out negative log-likelihood.

    Fold paths are fit at selection-grade tolerances and stop early once the
    fold's loss curve has risen ``patience`` grid steps past its minimum
    (the deep saturated tail is expensive and never selected); skipped
    indices count as infinite loss.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    design = X if isinstance(X, _Design) else _Design(X)
    Xc = design.X
    yv = np.asarray(y, dtype=float).ravel()
    n = yv.size
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float).ravel()
    labels = _fold_assignments(yv, folds, seed)

    losses = np.full((folds, path.values.size), np.inf)
    for k in range(folds):
        tr = labels != k
        te = ~tr
        design_tr = _Design(Xc[tr])
        Xte = Xc[te]
        wte = w[te] / w[te].sum()
        start = None
        lam_prev = None
        best = np.inf
        rises = 0
        for i, lam in enumerate(path.values):
            fit = fit_l1_logistic(
                design_tr,
                yv[tr],
                w[tr],
                off[tr],
                float(lam),
                start=start,
                lam_prev=lam_prev,
                inner_thresh=1e-8,
                max_sweeps=max_sweeps,
                raise_on_budget=False,
            )
            start = (fit.intercept, fit.coef)
            lam_prev = float(lam)
            eta = fit.linear_predictor(Xte, offset=off[te])
            nll = float(wte @ (np.logaddexp(0.0, eta) - yv[te] * eta))
            losses[k, i] = nll
            if nll < best - 1e-12:
                best, rises = nll, 0
            else:
                rises += 1
                if rises >= patience:
                    break
    mean_loss = losses.mean(axis=0)
    return path.with_cv_index(int(np.argmin(mean_loss)))


def undersmooth_by_offset(path: LambdaPath, offset: int) -> float:
    """Penalty ``offset`` grid positions below (smaller than) the CV choice."""
    if path.cv_index is None:
        raise ValueError("path has no CV index; run cv_select first")
    idx = min(path.cv_index + offset, path.values.size - 1)
    return float(path.values[idx])


def undersmooth_by_score(
    candidates: Sequence[float],
    criterion: Callable[[float], np.ndarray],
    threshold: float,
) -> tuple[float, bool]:
    """Largest candidate whose criterion scores are all below ``threshold``.

    Candidates must be decreasing.  When none qualifies, the smallest
    candidate is returned with ``qualified=False``.
    """
    cands = [float(c) for c in candidates]
    if any(b >= a for a, b in zip(cands, cands[1:])):
        raise ValueError("candidates must be strictly decreasing")
    for lam in cands:
        scores = np.atleast_1d(np.asarray(criterion(lam), dtype=float))
        if np.all(np.abs(scores) < threshold):
            return lam, True
    return cands[-1], False
