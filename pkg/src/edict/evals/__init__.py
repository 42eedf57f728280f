from edict.evals.calibration import (
    COVERAGE_LEVELS,
    CalibrationReport,
    ContractionSummary,
    CoverageCurve,
    contraction_diagnostic,
    coverage_curve,
    coverage_from_predictions,
    ece,
    eval_protocol,
    forecast_mse,
    predict_targets,
    read_report,
    write_report,
)
from edict.evals.classification import accuracy, auroc, macro_auroc

__all__ = [
    "COVERAGE_LEVELS",
    "CalibrationReport",
    "ContractionSummary",
    "CoverageCurve",
    "accuracy",
    "auroc",
    "contraction_diagnostic",
    "coverage_curve",
    "coverage_from_predictions",
    "ece",
    "eval_protocol",
    "forecast_mse",
    "macro_auroc",
    "predict_targets",
    "read_report",
    "write_report",
]
