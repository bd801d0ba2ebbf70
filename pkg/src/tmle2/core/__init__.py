"""Shared numerics: score-equation solving, empirical measures, finite-difference
derivative checks, influence-curve confidence intervals, and seeded RNG streams."""

from .empirical import EmpiricalMeasure
from .inference import CiResult, EmptyInput, influence_ci
from .pathwise import InvalidPerturbation, finite_diff_pathwise_derivative
from .rng import derive_rng, replication_rngs
from .rootfind import (
    NoBracket,
    NonFinite,
    ScoreFunction1D,
    ScoreRootError,
    solve_score_1d,
)

__all__ = [
    "CiResult",
    "EmpiricalMeasure",
    "EmptyInput",
    "InvalidPerturbation",
    "NoBracket",
    "NonFinite",
    "ScoreFunction1D",
    "ScoreRootError",
    "derive_rng",
    "finite_diff_pathwise_derivative",
    "influence_ci",
    "replication_rngs",
    "solve_score_1d",
]
