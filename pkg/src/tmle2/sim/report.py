"""Monte-Carlo study reports: per-estimator bias/SD/MSE with scaling notes.

SD is the population standard deviation so MSE = bias^2 + SD^2 holds as an
identity on the same draws.  CSV rendering uses repr floats (shortest
round-trip), which makes reruns with the same seed byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ReportRow:
    estimator: str
    n: int
    bias: float
    sd: float
    mse: float
    reps: int
    failures: int


@dataclass(frozen=True)
class SimReport:
    example: str
    scaling: str  # "none" or "sqrt_n" (bias, sd by sqrt(n); mse by n)
    rows: tuple
    seed: int
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["estimator,n,bias,sd,mse,reps,failures"]
        for r in self.rows:
            lines.append(
                f"{r.estimator},{r.n},{r.bias!r},{r.sd!r},{r.mse!r},{r.reps},{r.failures}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "example": self.example,
            "scaling": self.scaling,
            "seed": self.seed,
            "config": self.config,
            "rows": [vars(r) for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def row(self, estimator: str, n: int | None = None) -> ReportRow:
        for r in self.rows:
            if r.estimator == estimator and (n is None or r.n == n):
                return r
        raise KeyError(f"no row for {estimator!r} (n={n})")


def aggregate_errors(errors: np.ndarray, scale_n: int | None = None) -> tuple[float, float, float]:
    """(bias, sd, mse) of estimation errors; scaled by sqrt(n)/n when asked."""
    errs = np.asarray(errors, dtype=float)
    errs = errs[np.isfinite(errs)]
    bias = float(np.mean(errs))
    sd = float(np.std(errs))
    mse = float(np.mean(errs**2))
    if scale_n is not None:
        root = float(np.sqrt(scale_n))
        bias, sd, mse = bias * root, sd * root, mse * scale_n
    return bias, sd, mse
