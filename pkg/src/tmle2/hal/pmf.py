"""Discrete-hazard HAL density fitting.

The pmf on a fixed support grid is modeled through its discrete hazard
h(x_j) = P(O = x_j | O >= x_j), fit by L1-penalized logistic regression of
the event indicator on the indicator basis with knots at the supports, with
the last support absorbing the remaining mass:

    p(x_j) = h(x_j) * prod_{k<j} (1 - h(x_k)),   j < I-1
    p(x_{I-1}) = prod_{k<I-1} (1 - h(x_k)).

At-risk rows are aggregated per support (weight = at-risk count, response =
event proportion), which is the exact likelihood of the expanded per-person
rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.rng import derive_rng
from ..density2.pmf import DiscretePmf
from .basis import IndicatorBasis
from .lasso import HalFit, _Design, fit_l1_logistic_path
from .path import LambdaPath, lambda_path


class EmptySample(ValueError):
    """No observations to fit the hazard on."""


@dataclass(frozen=True)
class _HazardData:
    """Aggregated hazard rows for a sample of support indices."""

    design: _Design
    events: np.ndarray  # event proportion per at-risk row
    at_risk: np.ndarray  # at-risk count per row (regression weight)
    rows: np.ndarray  # support index per row


def _hazard_data(sample_idx: np.ndarray, supports: np.ndarray, basis: IndicatorBasis) -> _HazardData:
    n_supports = supports.size
    counts = np.bincount(sample_idx, minlength=n_supports).astype(float)
    at_risk_full = counts[::-1].cumsum()[::-1]
    rows = np.nonzero(at_risk_full[:-1] > 0)[0]  # last support absorbs; no hazard row
    at_risk = at_risk_full[rows]
    events = counts[rows] / at_risk
    design = _Design(basis.indicator_csc(supports[rows]))
    return _HazardData(design=design, events=events, at_risk=at_risk, rows=rows)


def _hazard_to_pmf(hazards: np.ndarray, rows: np.ndarray, n_supports: int) -> np.ndarray:
    """Convert per-row hazards back to a pmf; rows without at-risk mass get hazard 0."""
    h = np.zeros(n_supports - 1)
    h[rows] = hazards
    surv = np.concatenate([[1.0], np.cumprod(1.0 - h)])
    probs = np.empty(n_supports)
    probs[:-1] = h * surv[:-1]
    probs[-1] = surv[-1]
    return probs


class PmfFitter:
    """Hazard-HAL fitter bound to one sample; supports path fits and CV.

    Keeping the fitter around amortizes the design construction across the
    penalty grid, which the undersmoothing selectors rerun many times.
    """

    def __init__(self, sample, supports, link: str = "logit"):
        if link != "logit":
            raise ValueError(
                "only the logit hazard link is implemented; any strictly "
                "monotone link has the same saturated limit"
            )
        sample_idx = np.asarray(sample, dtype=int)
        if sample_idx.size == 0:
            raise EmptySample("need at least one observation")
        supports = np.asarray(supports, dtype=float)
        if np.any((sample_idx < 0) | (sample_idx >= supports.size)):
            raise ValueError("sample values must index the support grid")
        self.sample_idx = sample_idx
        self.supports = supports
        self.basis = IndicatorBasis(knots=supports)
        self.data = _hazard_data(sample_idx, supports, self.basis)

    # The saturated tail of the hazard path converges very slowly (tiny rows,
    # nested collinear columns), so these fits get a larger sweep budget.
    MAX_SWEEPS = 200_000

    def path(self) -> LambdaPath:
        d = self.data
        # the row count is post-aggregation; the glmnet-style grid-floor rule
        # should see the observation count
        ratio = 1e-4 if self.sample_idx.size > d.design.p else 0.01
        return lambda_path(d.design, d.events, weights=d.at_risk, min_ratio=ratio)

    def fits(self, lambdas) -> list[HalFit]:
        d = self.data
        return fit_l1_logistic_path(
            d.design, d.events, lambdas, weights=d.at_risk, max_sweeps=self.MAX_SWEEPS
        )

    def pmf_from_fit(self, fit: HalFit) -> DiscretePmf:
        d = self.data
        hazards = fit.predict_proba(d.design.X)
        probs = _hazard_to_pmf(hazards, d.rows, self.supports.size)
        return DiscretePmf(supports=self.supports, probs=probs)

    def fit(self, lam: float) -> DiscretePmf:
        return self.pmf_from_fit(self.fits([lam])[0])

    def cv_path(self, folds: int = 10, seed: int = 0) -> LambdaPath:
        """Select the penalty by K-fold held-out hazard log-likelihood.

        Folds split the expanded at-risk rows (person-support units), the
        same units a glmnet-style selector sees; the held-out loss is the
        Bernoulli log-likelihood of the event indicators, i.e. the density
        log-loss decomposed over the hazard rows.
        """
        path = self.path()
        rng = derive_rng(seed, 0xD0)
        n_supports = self.supports.size
        counts = np.bincount(self.sample_idx, minlength=n_supports).astype(int)
        at_risk_full = counts[::-1].cumsum()[::-1]
        # expanded rows: one (support, event) unit per person at risk
        sup_idx = np.repeat(np.arange(n_supports - 1), at_risk_full[:-1])
        events = np.concatenate(
            [
                np.concatenate([np.ones(counts[j]), np.zeros(at_risk_full[j] - counts[j])])
                for j in range(n_supports - 1)
            ]
        )
        n_units = sup_idx.size
        labels = np.empty(n_units, dtype=int)
        labels[rng.permutation(n_units)] = np.arange(n_units) % folds

        losses = np.zeros((folds, path.values.size))
        for k in range(folds):
            te = labels == k
            tr_events = np.bincount(sup_idx[~te], weights=events[~te], minlength=n_supports - 1)
            tr_atrisk = np.bincount(sup_idx[~te], minlength=n_supports - 1).astype(float)
            rows = np.nonzero(tr_atrisk > 0)[0]
            design = _Design(self.basis.indicator_csc(self.supports[rows]))
            fits = fit_l1_logistic_path(
                design,
                tr_events[rows] / tr_atrisk[rows],
                path.values,
                weights=tr_atrisk[rows],
                max_sweeps=self.MAX_SWEEPS,
            )
            te_events = np.bincount(sup_idx[te], weights=events[te], minlength=n_supports - 1)
            te_atrisk = np.bincount(sup_idx[te], minlength=n_supports - 1).astype(float)
            test_rows = np.nonzero(te_atrisk > 0)[0]
            Xte = self.basis.evaluate(self.supports[test_rows])[:, 1:]
            for i, fit in enumerate(fits):
                h = fit.predict_proba(Xte)
                nll = -(
                    te_events[test_rows] * np.log(h)
                    + (te_atrisk[test_rows] - te_events[test_rows]) * np.log(1.0 - h)
                )
                losses[k, i] = float(nll.sum() / te_atrisk[test_rows].sum())
        mean_loss = losses.mean(axis=0)
        return path.with_cv_index(int(np.argmin(mean_loss)))


def fit_hal_pmf(sample, supports, lam: float, link: str = "logit") -> DiscretePmf:
    """Hazard-HAL pmf at one penalty level; see :class:`PmfFitter`."""
    return PmfFitter(sample, supports, link=link).fit(lam)
