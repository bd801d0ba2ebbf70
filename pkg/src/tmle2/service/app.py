"""FastAPI service wrapping the estimators and simulation runners."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..sim.density_study import (
    ALL_ESTIMATORS,
    DensityStudyConfig,
    TrackConfig,
    run_density_study,
    track_total_remainder,
)
from ..sim.tsm_study import TsmStudyConfig, fit_hal_state, run_tsm_study
from ..tsm.models import TsmData, TsmState
from ..tsm.tmle import MaxIterations, iterative_2tmle
from .schemas import (
    CiModel,
    DensitySimulateRequest,
    DensityTrackRequest,
    DensityTrackResponse,
    HealthResponse,
    ReportRowModel,
    SimReportResponse,
    TrackRecordModel,
    TsmEstimateRequest,
    TsmEstimateResponse,
    TsmSimulateRequest,
)


def _report_response(report) -> SimReportResponse:
    return SimReportResponse(
        example=report.example,
        scaling=report.scaling,
        seed=report.seed,
        config=report.config,
        rows=[ReportRowModel(**vars(r)) for r in report.rows],
        csv=report.to_csv(),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="tmle2", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/density/simulate", response_model=SimReportResponse)
    def density_simulate(req: DensitySimulateRequest) -> SimReportResponse:
        unknown = set(req.estimators) - set(ALL_ESTIMATORS)
        if unknown:
            raise HTTPException(422, f"unknown estimators: {sorted(unknown)}")
        cfg = DensityStudyConfig(
            n=req.n,
            reps=req.reps,
            K=req.mixture_components,
            bias_mass=req.bias_mass,
            bias_mode=req.bias_mode,
            estimators=tuple(req.estimators),
            folds=req.folds,
            seed=req.seed,
            threads=req.threads,
        )
        return _report_response(run_density_study(cfg))

    @app.post("/density/track", response_model=DensityTrackResponse)
    def density_track(req: DensityTrackRequest) -> DensityTrackResponse:
        cfg = TrackConfig(
            n=req.n,
            K=req.mixture_components,
            bias_mass=req.bias_mass,
            bias_mode=req.bias_mode,
            folds=req.folds,
            seed=req.seed,
            step=req.step,
        )
        records = track_total_remainder(cfg)
        lines = ["step,rbar1,abs_d2_score"]
        lines += [f"{r.step},{r.rbar1!r},{r.abs_d2_score!r}" for r in records]
        return DensityTrackResponse(
            records=[TrackRecordModel(**vars(r)) for r in records],
            csv="\n".join(lines) + "\n",
        )

    @app.post("/tsm/simulate", response_model=SimReportResponse)
    def tsm_simulate(req: TsmSimulateRequest) -> SimReportResponse:
        cfg = TsmStudyConfig(
            variant=req.variant,
            n_list=tuple(req.n_list),
            reps=req.reps,
            folds=req.folds,
            seed=req.seed,
            threads=req.threads,
            undersmooth_offset=req.undersmooth_offset,
        )
        return _report_response(run_tsm_study(cfg))

    @app.post("/tsm/estimate", response_model=TsmEstimateResponse)
    def tsm_estimate(req: TsmEstimateRequest) -> TsmEstimateResponse:
        try:
            data = TsmData(w=req.w, a=req.a, y=req.y)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        try:
            states = fit_hal_state(data, (0, req.undersmooth_offset), req.folds, req.seed)
            result = iterative_2tmle(
                data, states[0], states[req.undersmooth_offset], level=req.level
            )
        except MaxIterations as exc:
            raise HTTPException(500, f"estimation did not converge: {exc}") from exc
        return TsmEstimateResponse(
            n=data.n,
            psi_second=result.psi,
            ci_second=CiModel(**result.ci_second.as_dict()),
            psi_first=result.psi_first,
            ci_first=CiModel(**result.ci_first.as_dict()),
            iterations=result.iterations,
            converged=result.converged,
        )

    return app


app = create_app()
