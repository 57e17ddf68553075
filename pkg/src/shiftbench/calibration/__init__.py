"""Calibration fitting and diagnostics"""

from .calibrators import (
    CalibrationReport,
    Calibrator,
    CalibratorKind,
    apply_calibrator,
    fit_calibrator,
    logits_from_probabilities,
    nll_and_grad,
)
from .metrics import (
    DEFAULT_ECE_BINS,
    ReliabilityCurve,
    classwise_calibration_error,
    ece,
    reliability_curve,
    top_label_shift_agreement,
)

__all__ = [
    "CalibrationReport",
    "Calibrator",
    "CalibratorKind",
    "apply_calibrator",
    "fit_calibrator",
    "logits_from_probabilities",
    "nll_and_grad",
    "DEFAULT_ECE_BINS",
    "ReliabilityCurve",
    "classwise_calibration_error",
    "ece",
    "reliability_curve",
    "top_label_shift_agreement",
]
