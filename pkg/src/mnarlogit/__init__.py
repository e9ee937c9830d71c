"""Logistic regression under outcome-dependent missingness, with a relative-risk correction."""

from .correction import (
    CorrectedEstimate,
    DeltaEstimate,
    fit_corrected,
    fit_marginal_selection,
    log_rr_s_given_y,
    log_rr_y_given_s_approx,
    log_rr_y_given_s_exact,
    selection_offset,
)
from .data import Dataset, DesignMatrix, from_records, make_design, observed_subsample, read_csv
from .estimator import HeckmanLogit, SelectionWarning
from .glm import LogisticFit, LogitIRLS
from .oracle import DEFAULT_TRUTH, CovariateLaw, TruthSpec, conditional_table
from .simulation import McReport, SimConfig, generate_dataset, run_monte_carlo
from .smoother import PiHat, PSplineLogit, fit_pi_hat

__all__ = [
    "CorrectedEstimate", "CovariateLaw", "DEFAULT_TRUTH", "Dataset", "DeltaEstimate",
    "DesignMatrix", "HeckmanLogit", "LogisticFit", "LogitIRLS", "McReport", "PSplineLogit",
    "PiHat", "SelectionWarning", "SimConfig", "TruthSpec", "conditional_table",
    "fit_corrected", "fit_marginal_selection", "fit_pi_hat", "from_records",
    "generate_dataset", "log_rr_s_given_y", "log_rr_y_given_s_approx",
    "log_rr_y_given_s_exact", "make_design", "observed_subsample", "read_csv",
    "run_monte_carlo", "selection_offset",
]

__version__ = "0.1.0"
