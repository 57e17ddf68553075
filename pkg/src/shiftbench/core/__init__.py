"""Core probability types, errors and the prior update"""

from .errors import *  # noqa: F401,F403
from .errors import __all__ as _error_names
from .prior_update import batch_prior_update, prior_ratio, prior_update, reweight_rows
from .types import (
    INGEST_TOL,
    SIMPLEX_TOL,
    ConfusionKind,
    PredictionMode,
    ConfusionMatrix,
    LabeledBatch,
    LogitMatrix,
    PosteriorMatrix,
    ProbabilitySimplex,
    ShiftWeights,
    validate_posteriors,
    validate_simplex,
)

__all__ = [
    *_error_names,
    "INGEST_TOL",
    "SIMPLEX_TOL",
    "ConfusionKind",
    "PredictionMode",
    "ConfusionMatrix",
    "LabeledBatch",
    "LogitMatrix",
    "PosteriorMatrix",
    "ProbabilitySimplex",
    "ShiftWeights",
    "validate_posteriors",
    "validate_simplex",
    "prior_ratio",
    "prior_update",
    "reweight_rows",
    "batch_prior_update",
]
