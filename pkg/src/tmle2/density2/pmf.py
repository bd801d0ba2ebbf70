"""Finite-support pmfs and the integrated-square functional.

The target is Psi(p) = sum_x p(x)^2 with canonical gradient
D1(x) = 2 p(x) - 2 Psi(p) and exact remainder

    Psi(p) - Psi(p0) + sum_x p0(x) D1_p(x) = -sum_x (p(x) - p0(x))^2,

an identity on shared supports that the remainder routine verifies at every
call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SUM_TOL = 1e-12


class SupportMismatch(ValueError):
    """Two pmfs do not share the same support grid."""


class InvalidPmf(ValueError):
    """Masses went negative or stopped summing to one."""


@dataclass(frozen=True)
class DiscretePmf:
    supports: np.ndarray
    probs: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.supports, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if s.ndim != 1 or s.shape != p.shape:
            raise ValueError("supports and probs must be matching 1-d arrays")
        if np.any(np.diff(s) <= 0):
            raise ValueError("supports must be strictly increasing")
        if np.any(p < 0):
            raise InvalidPmf(f"negative mass (min {p.min():.3e})")
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise InvalidPmf(f"masses sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "supports", s)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.supports.size

    def with_probs(self, probs: np.ndarray) -> "DiscretePmf":
        return DiscretePmf(supports=self.supports, probs=np.asarray(probs, dtype=float))

    def same_supports(self, other: "DiscretePmf") -> bool:
        return self.size == other.size and bool(np.all(self.supports == other.supports))


def psi(p: DiscretePmf) -> float:
    """Integrated square of the pmf."""
    return float(np.dot(p.probs, p.probs))


def d1(p: DiscretePmf) -> np.ndarray:
    """First-order canonical gradient 2p - 2*Psi(p), mean zero under p."""
    return 2.0 * p.probs - 2.0 * psi(p)


def r1_exact(p: DiscretePmf, p0: DiscretePmf) -> float:
    """Exact first-order remainder -sum (p - p0)^2 on a shared support."""
    if not p.same_supports(p0):
        raise SupportMismatch("remainder requires identical supports")
    value = -float(np.sum((p.probs - p0.probs) ** 2))
    via_gradient = psi(p) - psi(p0) + float(np.dot(p0.probs, d1(p)))
    if abs(value - via_gradient) > 1e-12:
        raise AssertionError(
            f"remainder identity violated: {value!r} vs {via_gradient!r}"
        )
    return value


def empirical_pmf(sample_indices, supports) -> DiscretePmf:
    """Empirical pmf of support-index draws on a fixed grid."""
    supports = np.asarray(supports, dtype=float)
    idx = np.asarray(sample_indices, dtype=int)
    if idx.size == 0:
        raise ValueError("empty sample")
    if np.any((idx < 0) | (idx >= supports.size)):
        raise ValueError("sample indices outside the support grid")
    counts = np.bincount(idx, minlength=supports.size).astype(float)
    return DiscretePmf(supports=supports, probs=counts / idx.size)
