"""Label shift estimators"""

from ..core.types import PredictionMode
from .base_estimator import (
    BaseEstimator,
    BbslEstimator,
    CountEstimator,
    EmEstimator,
    EstimationInputs,
    LeipEstimator,
    RllsEstimator,
    RllsHardEstimator,
)
from .confusion import (
    estimate_bbsl,
    estimate_rlls,
    normalise_weights,
    solve_bbsl,
    solve_rlls,
)
from .counting import estimate_cc, mean_prediction
from .em import em_objective, estimate_em
from .leip import estimate_leip, percentile_value, select_tau, tau_fraction
from .models import (
    EmConfig,
    EmInit,
    EstimateResult,
    LeipConfig,
    RllsConfig,
    RllsRule,
)
from .registry import EstimatorRegistry, get_estimator_registry

__all__ = [
    "BaseEstimator",
    "BbslEstimator",
    "CountEstimator",
    "EmEstimator",
    "EstimationInputs",
    "LeipEstimator",
    "RllsEstimator",
    "RllsHardEstimator",
    "estimate_bbsl",
    "estimate_rlls",
    "normalise_weights",
    "solve_bbsl",
    "solve_rlls",
    "estimate_cc",
    "mean_prediction",
    "em_objective",
    "estimate_em",
    "estimate_leip",
    "percentile_value",
    "select_tau",
    "tau_fraction",
    "EmConfig",
    "EmInit",
    "EstimateResult",
    "LeipConfig",
    "PredictionMode",
    "RllsConfig",
    "RllsRule",
    "EstimatorRegistry",
    "get_estimator_registry",
]
