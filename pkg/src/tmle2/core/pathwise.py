"""Central-difference pathwise derivatives along multiplicative score paths.

Used to validate closed-form canonical gradients: the derivative of a target
functional along the path ``p_delta = (1 + delta*h) p`` with mean-zero score
``h`` must match the inner product of the gradient with ``h`` under ``p``.
Central differences are exact for quadratic functionals.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class InvalidPerturbation(ValueError):
    """The perturbed state left the parameter space (negative masses)."""


def finite_diff_pathwise_derivative(
    psi: Callable[[np.ndarray], float],
    p: np.ndarray,
    h: np.ndarray,
    delta: float = 1e-5,
) -> float:
    """Central difference of ``psi`` along ``(1 + delta*h) p``.

    ``h`` should be mean zero under ``p`` so the perturbation stays a
    probability vector.  Both one-sided perturbations must keep all masses
    nonnegative, otherwise :class:`InvalidPerturbation` is raised.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    p_plus = (1.0 + delta * h) * p
    p_minus = (1.0 - delta * h) * p
    if np.any(p_plus < 0) or np.any(p_minus < 0):
        raise InvalidPerturbation("perturbed masses went negative; shrink delta")
    return (psi(p_plus) - psi(p_minus)) / (2.0 * delta)
