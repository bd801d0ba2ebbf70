"""Influence-curve based Wald confidence intervals.

The variance estimate is the plain second moment of the estimated influence
values, sigma_n^2 = mean(D_i^2); the interval is estimate +/- z * sigma_n/sqrt(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


class EmptyInput(ValueError):
    """No influence values supplied."""


@dataclass(frozen=True)
class CiResult:
    estimate: float
    std_error: float
    lower: float
    upper: float
    level: float

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if not self.lower <= self.estimate <= self.upper:
            raise ValueError("interval must contain the estimate")

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
        }


def influence_ci(estimate: float, influence_values, level: float = 0.95) -> CiResult:
    """Symmetric Wald interval from per-observation influence values."""
    values = np.asarray(influence_values, dtype=float)
    if values.size == 0:
        raise EmptyInput("need at least one influence value")
    n = values.size
    sigma = float(np.sqrt(np.mean(values**2)))
    se = sigma / np.sqrt(n)
    z = float(norm.ppf(0.5 * (1.0 + level)))
    return CiResult(
        estimate=float(estimate),
        std_error=se,
        lower=float(estimate - z * se),
        upper=float(estimate + z * se),
        level=float(level),
    )
