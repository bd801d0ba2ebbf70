"""Weighted empirical measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A finite collection of observations with normalized weights.

    ``observations`` is an array whose leading axis indexes observations;
    the payload per observation is domain specific (support indices for the
    density example, (W, A, Y) rows for the treatment example).
    """

    observations: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        obs = np.asarray(self.observations)
        if obs.shape[0] == 0:
            raise ValueError("empirical measure needs at least one observation")
        object.__setattr__(self, "observations", obs)
        if self.weights is None:
            w = np.full(obs.shape[0], 1.0 / obs.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
        if w.shape != (obs.shape[0],):
            raise ValueError("weights must be one per observation")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    def expectation(self, values: np.ndarray) -> float:
        """Weighted mean of per-observation values."""
        v = np.asarray(values, dtype=float)
        if v.shape[0] != self.n:
            raise ValueError("one value per observation required")
        return float(np.dot(self.weights, v))
