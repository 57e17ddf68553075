"""
Estimator configuration and result models
"""

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import EstimatorSettings
from ..core.types import ProbabilitySimplex, ShiftWeights, validate_simplex


class EmInit(StrEnum):
    SOURCE_PRIOR = "source_prior"
    SOFT_MEAN_VALIDATION = "soft_mean_validation"
    EXPLICIT = "explicit"


class RllsRule(StrEnum):
    ALPHA = "alpha"
    THEORETICAL = "theoretical"


class EmConfig(BaseModel):
    """EM settings; ``init=None`` picks SoftMeanValidation when validation is given"""

    model_config = ConfigDict(frozen=True)

    init: Optional[EmInit] = None
    explicit_prior: Optional[List[float]] = None
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=10_000, ge=1)
    strict: bool = Field(
        default=False, description="Raise NoConvergence when max_iter is reached"
    )

    @model_validator(mode="after")
    def check_explicit(self) -> "EmConfig":
        if self.init is EmInit.EXPLICIT and self.explicit_prior is None:
            raise ValueError("explicit EM init needs explicit_prior")
        return self

    def explicit(self) -> ProbabilitySimplex:
        assert self.explicit_prior is not None
        return validate_simplex(self.explicit_prior)

    @classmethod
    def from_settings(cls, settings: EstimatorSettings, **overrides: Any) -> "EmConfig":
        defaults = {"tol": settings.em_tol, "max_iter": settings.em_max_iter}
        return cls(**{**defaults, **overrides})


class LeipConfig(BaseModel):
    """LEIP settings; ``tau=None`` selects the threshold from the confusion recalls"""

    model_config = ConfigDict(frozen=True)

    tau: Optional[float] = Field(default=None, gt=0, le=1)
    floor: Optional[float] = Field(default=None, gt=0)
    recall_floor: float = Field(default=0.3, ge=0, le=1)

    @property
    def auto_tau(self) -> bool:
        return self.tau is None

    @classmethod
    def from_settings(
        cls, settings: EstimatorSettings, **overrides: Any
    ) -> "LeipConfig":
        return cls(**{"recall_floor": settings.tau_recall_floor, **overrides})


class RllsConfig(BaseModel):
    """RLLS regularisation settings"""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=0.01, ge=0)
    delta: float = Field(default=0.05, gt=0, lt=1)
    lambda_override: Optional[float] = Field(default=None, ge=0)
    rule: RllsRule = RllsRule.ALPHA

    def regularisation(self, m: int, n_validation: Optional[int] = None) -> float:
        """Ridge strength for an m-class problem fitted on ``n_validation`` samples"""
        if self.lambda_override is not None:
            return self.lambda_override
        if self.rule is RllsRule.ALPHA or not n_validation:
            return self.alpha
        log_term = math.log(2 * m / self.delta)
        bound = 2 * log_term / (3 * n_validation) + math.sqrt(
            2 * log_term / n_validation
        )
        return self.alpha * 3 * bound

    @classmethod
    def from_settings(
        cls, settings: EstimatorSettings, **overrides: Any
    ) -> "RllsConfig":
        defaults = {"alpha": settings.rlls_alpha, "delta": settings.rlls_delta}
        return cls(**{**defaults, **overrides})


@dataclass(frozen=True)
class EstimateResult:
    """Estimated target prior plus per-estimator facts"""

    estimator: str
    distribution: ProbabilitySimplex
    iterations: int = 0
    tau_used: Optional[float] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)
    weights: Optional[ShiftWeights] = None
    trace: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "estimator": self.estimator,
            "distribution": self.distribution.tolist(),
            "iterations": self.iterations,
            "tau_used": self.tau_used,
            "diagnostics": dict(self.diagnostics),
        }
        if self.weights is not None:
            data["estimator_weights"] = self.weights.tolist()
        return data
