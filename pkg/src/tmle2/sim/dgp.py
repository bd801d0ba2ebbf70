"""Data-generating processes and biased-initial constructors for both examples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import expit
from scipy.stats import norm

from ..density2.pmf import DiscretePmf
from ..tsm.models import TsmData, TsmState, outcome_model, treatment_model

DENSITY_INTERVAL = (-5.0, 5.0)
DENSITY_SUPPORTS = 21
MEAN_INTERVAL = (-4.0, 4.0)


def make_density_p0(K: int, I: int = DENSITY_SUPPORTS) -> DiscretePmf:
    """Discretized K-component Gaussian mixture on the fixed support grid.

    Component means are evenly placed on [-4, 4] (centered for K=1), the
    common sd is 10/K/6, and bin probabilities are normal-cdf differences
    with the end bins absorbing both tails.
    """
    if K < 1 or I < 2:
        raise ValueError("need K >= 1 mixture components and I >= 2 supports")
    supports = np.linspace(*DENSITY_INTERVAL, I)
    if K == 1:
        means = np.array([0.5 * (MEAN_INTERVAL[0] + MEAN_INTERVAL[1])])
    else:
        means = np.linspace(*MEAN_INTERVAL, K)
    sigma = 10.0 / K / 6.0
    edges = np.concatenate([[-np.inf], supports[:-1], [np.inf]])
    probs = np.zeros(I)
    for mu in means:
        cdf = norm.cdf(edges, loc=mu, scale=sigma)
        probs += np.diff(cdf) / K
    probs = probs / probs.sum()  # exact unit mass despite cdf rounding
    return DiscretePmf(supports=supports, probs=probs)


@dataclass(frozen=True)
class DensityDgp:
    """Mixture truth for the integrated-square simulations."""

    K: int = 4
    I: int = DENSITY_SUPPORTS
    p0: DiscretePmf = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p0", make_density_p0(self.K, self.I))

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.I, size=n, p=self.p0.probs)


def bias_initial_density(
    empirical: DiscretePmf,
    mass: float,
    mode: str = "all",
    rng: np.random.Generator | None = None,
    n_biased: int = 5,
) -> DiscretePmf:
    """Biased initial: add ``mass`` to supports and rescale to sum one.

    ``mode="all"`` spreads the mass over every support; ``mode="random"``
    puts it on ``n_biased`` seeded-randomly selected supports.
    """
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    probs = empirical.probs.copy()
    if mode == "all":
        probs = probs + mass
    elif mode == "random":
        if rng is None:
            raise ValueError("random mode needs an rng")
        chosen = rng.choice(empirical.size, size=n_biased, replace=False)
        probs[chosen] += mass
    else:
        raise ValueError(f"unknown bias mode {mode!r}")
    return empirical.with_probs(probs / probs.sum())


# ---------------------------------------------------------------------------
# treatment-specific mean

def gbar0(w):
    return expit(2.0 * w - w**2)


def qbar0(w, a):
    return expit(w + np.asarray(a, dtype=float) / 2.0)


def tsm_psi0() -> float:
    """True value E expit(W + 1/2) for W ~ U(-1, 1), by adaptive quadrature."""
    value, _ = quad(lambda w: expit(w + 0.5), -1.0, 1.0, epsabs=1e-12, limit=200)
    return value / 2.0


@dataclass(frozen=True)
class TsmDgp:
    """Point-treatment DGP with the four simulation variants' initials.

    W ~ U(-1,1); A|W Bernoulli(expit(2W - W^2)); Y|A,W Bernoulli(expit(W + A/2)).
    Variant 1 initials are inconsistent for the outcome regression; variants
    2-3 add a deterministic n^{-1/4} bias to the truth; variant 4 uses HAL
    fits as initials (built by the study runner, not here).
    """

    variant: int = 1
    psi0: float = field(init=False)

    def __post_init__(self) -> None:
        if self.variant not in (1, 2, 3, 4):
            raise ValueError("variant must be 1..4")
        object.__setattr__(self, "psi0", tsm_psi0())

    def sample(self, n: int, rng: np.random.Generator) -> TsmData:
        w = rng.uniform(-1.0, 1.0, size=n)
        a = (rng.random(n) < gbar0(w)).astype(float)
        y = (rng.random(n) < qbar0(w, a)).astype(float)
        return TsmData(w=w, a=a, y=y)

    def analytic_initial(self, n: int) -> TsmState | None:
        """Analytic biased initial state for variants 1-3 (None for 4)."""
        if self.variant == 4:
            return None
        shift = 1.0 / n**0.25

        def g_init(w):
            return gbar0(w) + (0.1 + 2.0 * np.abs(w)) / 2.0 * shift

        if self.variant == 1:

            def q_init(w, a):
                a = np.asarray(a, dtype=float)
                base = expit(2.0 * w + 2.0 * a + a * w / 2.0)
                return base + np.abs(0.1 + 2.0 * np.abs(w) - a) / 3.0 * shift

        else:

            def q_init(w, a):
                a = np.asarray(a, dtype=float)
                return qbar0(w, a) + np.abs(0.1 + 2.0 * np.abs(w) + a / 2.0) / 3.0 * shift

        return TsmState(
            qw=np.empty(0),  # bound to data when the study attaches it
            gbar=treatment_model(g_init),
            qbar=outcome_model(q_init),
        )

    @property
    def hal_offset(self) -> int:
        """Grid offset below the CV penalty for the HAL pair."""
        return {1: 10, 2: 10, 3: 0, 4: 5}[self.variant]
