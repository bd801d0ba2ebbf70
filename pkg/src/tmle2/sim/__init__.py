"""Simulation harness: DGPs, biased initials, replication runners, reports."""

from .dgp import (
    DensityDgp,
    TsmDgp,
    bias_initial_density,
    gbar0,
    make_density_p0,
    qbar0,
    tsm_psi0,
)
from .density_study import (
    ALL_ESTIMATORS,
    DEFAULT_ESTIMATORS,
    DensityStudyConfig,
    TrackConfig,
    TrackRecord,
    run_density_study,
    track_total_remainder,
)
from .report import ReportRow, SimReport, aggregate_errors
from .tsm_study import DEFAULT_N_LISTS, TsmStudyConfig, fit_hal_state, run_tsm_study

__all__ = [
    "ALL_ESTIMATORS",
    "DEFAULT_ESTIMATORS",
    "DEFAULT_N_LISTS",
    "DensityDgp",
    "DensityStudyConfig",
    "ReportRow",
    "SimReport",
    "TrackConfig",
    "TrackRecord",
    "TsmDgp",
    "TsmStudyConfig",
    "aggregate_errors",
    "bias_initial_density",
    "fit_hal_state",
    "gbar0",
    "make_density_p0",
    "qbar0",
    "run_density_study",
    "run_tsm_study",
    "track_total_remainder",
    "tsm_psi0",
]
