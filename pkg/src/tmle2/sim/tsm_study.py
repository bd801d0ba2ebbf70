"""Monte-Carlo studies for the treatment-specific mean."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core.rng import derive_rng
from ..hal.basis import build_basis, treatment_design, tsm_outcome_design_spec
from ..hal.lasso import fit_l1_logistic_path
from ..hal.path import cv_select, lambda_path
from ..tsm.models import TsmData, TsmState, outcome_model, treatment_model
from ..tsm.tmle import iterative_2tmle
from .dgp import TsmDgp
from .report import ReportRow, SimReport, aggregate_errors

DEFAULT_N_LISTS = {
    1: (400, 750, 1000, 1200, 1600, 2500),
    2: (500, 1000, 1500, 2500, 4000),
    3: (500, 1000, 1500, 2500, 4000),
    4: (1000, 1500, 2500, 4000),
}


@dataclass(frozen=True)
class TsmStudyConfig:
    variant: int = 1
    n_list: tuple = (400, 1000, 2500)
    reps: int = 200
    folds: int = 10
    seed: int = 0
    threads: int = 1
    undersmooth_offset: int | None = None  # None: the variant's own offset

    def as_dict(self) -> dict:
        d = dict(vars(self))
        d["n_list"] = list(self.n_list)
        return d


def fit_hal_state(
    data: TsmData, offsets: tuple[int, ...], folds: int, seed: int
) -> dict[int, TsmState]:
    """HAL logistic fits for (gbar, qbar) at CV-offset penalties.

    One penalty path per model, warm-started down to the deepest offset;
    each requested offset maps to a state whose base predictors evaluate the
    fitted models through the indicator basis.
    """
    basis = build_basis(data.w)
    Xg = treatment_design(basis, data.w)
    Xq, q_spec = tsm_outcome_design_spec(basis, data.w, data.a)

    path_g = cv_select(Xg, data.a, lambda_path(Xg, data.a), folds=folds, seed=seed)
    path_q = cv_select(Xq, data.y, lambda_path(Xq, data.y), folds=folds, seed=seed + 1)

    def fits_at(X, y, path, offsets):
        deepest = min(max(path.cv_index + off for off in offsets), path.values.size - 1)
        fits = fit_l1_logistic_path(X, y, path.values[: deepest + 1], max_sweeps=100_000)
        return {off: fits[min(path.cv_index + off, path.values.size - 1)] for off in offsets}

    fits_g = fits_at(Xg, data.a, path_g, offsets)
    fits_q = fits_at(Xq, data.y, path_q, offsets)

    states = {}
    for off in offsets:
        fg, fq = fits_g[off], fits_q[off]

        def g_fn(w, fit=fg):
            return fit.predict_proba(basis.indicator_csc(np.atleast_1d(np.asarray(w, dtype=float))))

        def q_fn(w, a, fit=fq, spec=q_spec):
            return fit.predict_proba(spec.matrix(w, a))

        states[off] = TsmState(
            qw=data.w, gbar=treatment_model(g_fn), qbar=outcome_model(q_fn)
        )
    return states


def _tsm_rep(cfg: TsmStudyConfig, dgp: TsmDgp, n: int, rep: int) -> dict:
    rng = derive_rng(cfg.seed, n, rep)
    data = dgp.sample(n, rng)
    cv_seed = int(rng.integers(2**31))
    tilde_offset = cfg.undersmooth_offset if cfg.undersmooth_offset is not None else dgp.hal_offset

    try:
        if dgp.variant == 4:
            states = fit_hal_state(data, (0, tilde_offset), cfg.folds, cv_seed)
            initial = states[0]
            hal = states[tilde_offset]
        else:
            states = fit_hal_state(data, (tilde_offset,), cfg.folds, cv_seed)
            hal = states[tilde_offset]
            proto = dgp.analytic_initial(n)
            initial = TsmState(qw=data.w, gbar=proto.gbar, qbar=proto.qbar)
        res = iterative_2tmle(data, initial, hal)
        if rep % 100 == 0:
            last = res.records[-1]
            tol = 1.0 / n
            for value in (last.pn_d1, last.pn_d2):
                if abs(value) >= tol:
                    raise AssertionError(f"stopping score {value:.3e} >= 1/n")
        return {
            "tmle_1st": res.psi_first - dgp.psi0,
            "tmle_2nd": res.psi - dgp.psi0,
        }
    except Exception:
        return {"tmle_1st": np.nan, "tmle_2nd": np.nan}


def _tsm_chunk(args) -> list:
    cfg, n, reps = args
    dgp = TsmDgp(variant=cfg.variant)
    return [((n, r), _tsm_rep(cfg, dgp, n, r)) for r in reps]


def run_tsm_study(cfg: TsmStudyConfig) -> SimReport:
    """Replicated study; bias and SD scaled by sqrt(n), MSE by n."""
    jobs = []
    rep_ids = list(range(cfg.reps))
    for n in cfg.n_list:
        if cfg.threads > 1:
            chunks = [rep_ids[i :: cfg.threads * 2] for i in range(cfg.threads * 2)]
            jobs.extend((cfg, n, c) for c in chunks if c)
        else:
            jobs.append((cfg, n, rep_ids))

    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(_tsm_chunk, jobs))
    else:
        parts = [_tsm_chunk(j) for j in jobs]
    pairs = sorted(p for part in parts for p in part)

    rows = []
    for name in ("tmle_1st", "tmle_2nd"):
        for n in cfg.n_list:
            errs = np.array([res[name] for (nn, _r), res in pairs if nn == n])
            failures = int(np.sum(~np.isfinite(errs)))
            bias, sd, mse = aggregate_errors(errs, scale_n=n)
            rows.append(
                ReportRow(
                    estimator=name,
                    n=n,
                    bias=bias,
                    sd=sd,
                    mse=mse,
                    reps=cfg.reps,
                    failures=failures,
                )
            )
    return SimReport(
        example="tsm",
        scaling="sqrt_n",
        rows=tuple(rows),
        seed=cfg.seed,
        config=cfg.as_dict(),
    )
