"""Request/response models for the estimation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

from ..sim.density_study import DEFAULT_ESTIMATORS


class HealthResponse(BaseModel):
    status: str
    version: str


class ReportRowModel(BaseModel):
    estimator: str
    n: int
    bias: float
    sd: float
    mse: float
    reps: int
    failures: int


class SimReportResponse(BaseModel):
    example: str
    scaling: str
    seed: int
    config: dict
    rows: list[ReportRowModel]
    csv: str = Field(description="rendered CSV, byte-stable for a given seed")


class DensitySimulateRequest(BaseModel):
    n: int = 500
    reps: int = 200
    mixture_components: int = 4
    bias_mass: float = 0.06
    bias_mode: Literal["random", "all"] = "random"
    estimators: list[str] = Field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    folds: int = 10
    seed: int = 0
    threads: int = 1

    @field_validator("n", "reps", "mixture_components", "folds", "threads")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v


class DensityTrackRequest(BaseModel):
    n: int = 500
    mixture_components: int = 4
    bias_mass: float = 0.06
    bias_mode: Literal["all", "random"] = "all"
    folds: int = 10
    seed: int = 0
    step: float = 0.01


class TrackRecordModel(BaseModel):
    step: int
    rbar1: float
    abs_d2_score: float


class DensityTrackResponse(BaseModel):
    records: list[TrackRecordModel]
    csv: str


class TsmSimulateRequest(BaseModel):
    variant: int = 1
    n_list: list[int] = Field(default_factory=lambda: [400, 1000, 2500])
    reps: int = 200
    folds: int = 10
    seed: int = 0
    threads: int = 1
    undersmooth_offset: Optional[int] = None

    @field_validator("variant")
    @classmethod
    def _variant(cls, v: int) -> int:
        if v not in (1, 2, 3, 4):
            raise ValueError("variant must be 1..4")
        return v


class CiModel(BaseModel):
    estimate: float
    std_error: float
    lower: float
    upper: float
    level: float


class TsmEstimateRequest(BaseModel):
    w: list[float]
    a: list[int]
    y: list[float]
    undersmooth_offset: int = 10
    folds: int = 10
    seed: int = 0
    level: float = 0.95

    @field_validator("a")
    @classmethod
    def _binary(cls, v: list[int]) -> list[int]:
        if any(x not in (0, 1) for x in v):
            raise ValueError("treatment must be binary")
        return v


class TsmEstimateResponse(BaseModel):
    n: int
    psi_second: float
    ci_second: CiModel
    psi_first: float
    ci_first: CiModel
    iterations: int
    converged: bool
