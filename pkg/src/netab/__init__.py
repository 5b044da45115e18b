"""Simulation, estimation and error bounds for A/B tests under network interference."""

from .bounds import (
    BoundResult,
    FisherInfo,
    TauBoundResult,
    crlb_linear,
    crlb_logit,
    crlb_probit,
    crlb_tau,
    delta_method,
    fim_logit,
    fim_probit,
    mse_tau_closed,
    mse_taubin_closed,
)
from .estimators import (
    EstimationResult,
    ExposureClasses,
    build_design_linear,
    build_design_tau,
    classify_exposure,
    estimate_ate_linear,
    logit_mle,
    ols_fit,
    probit_mle,
    sutva_diff_in_means,
    tau_diff_in_means,
    tau_ols,
)
from .experiment import (
    ExperimentConfig,
    StudyReport,
    assign_treatment,
    run_study,
    welch_test,
)
from .graph import Graph, erdos_renyi, load_edge_list, parse_edge_list, treated_fraction
from .models import ModelKind, ModelParams, ResponseVector, generate, mean_response, true_ate
from .report import export_report

__version__ = "0.1.0"

__all__ = [
    "BoundResult",
    "EstimationResult",
    "ExperimentConfig",
    "ExposureClasses",
    "FisherInfo",
    "Graph",
    "ModelKind",
    "ModelParams",
    "ResponseVector",
    "StudyReport",
    "TauBoundResult",
    "assign_treatment",
    "build_design_linear",
    "build_design_tau",
    "classify_exposure",
    "crlb_linear",
    "crlb_logit",
    "crlb_probit",
    "crlb_tau",
    "delta_method",
    "erdos_renyi",
    "estimate_ate_linear",
    "export_report",
    "fim_logit",
    "fim_probit",
    "generate",
    "load_edge_list",
    "logit_mle",
    "mean_response",
    "mse_tau_closed",
    "mse_taubin_closed",
    "ols_fit",
    "parse_edge_list",
    "probit_mle",
    "run_study",
    "sutva_diff_in_means",
    "tau_diff_in_means",
    "tau_ols",
    "treated_fraction",
    "true_ate",
    "welch_test",
]
