"""
Base estimator class for shiftbench

This module provides the abstract base class for all label shift estimators
and the built-in estimator wrappers around the functional API.
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import structlog

from ..core.errors import DimensionMismatch, MissingValidation, ShiftBenchError
from ..core.types import (
    LabeledBatch,
    PosteriorMatrix,
    PredictionMode,
    ProbabilitySimplex,
    ShiftWeights,
)
from ..simulation.confusion import estimate_confusion
from ..utils.logging import performance_logger
from .confusion import estimate_bbsl, estimate_rlls
from .counting import estimate_cc, mean_prediction
from .em import estimate_em
from .leip import estimate_leip
from .models import EmConfig, EstimateResult, LeipConfig, RllsConfig


@dataclass(frozen=True)
class EstimationInputs:
    """Everything an estimator may consume.

    ``source`` is the prior the test posteriors were produced under.
    ``validation`` holds calibrated validation posteriors and labels.
    """

    test: PosteriorMatrix
    source: ProbabilitySimplex
    validation: Optional[LabeledBatch] = None
    em: EmConfig = field(default_factory=EmConfig)
    leip: LeipConfig = field(default_factory=LeipConfig)
    rlls: RllsConfig = field(default_factory=RllsConfig)

    def validation_prior(self) -> ProbabilitySimplex:
        """Hard-count label frequencies of the validation batch"""
        batch = self.require_validation()
        return ProbabilitySimplex(batch.class_counts() / batch.n)

    def require_validation(self) -> LabeledBatch:
        if self.validation is None:
            raise MissingValidation("this estimator needs a labeled validation batch")
        return self.validation


class BaseEstimator(ABC):
    """
    Abstract base class for all label shift estimators

    Provides input checks, timing and performance logging around the
    estimator-specific ``_estimate``.
    """

    requires_validation: bool = False
    requires_source: bool = True

    def __init__(self) -> None:
        self.logger = structlog.get_logger(self.__class__.__name__)

    @property
    @abstractmethod
    def name(self) -> str:
        """Estimator name identifier"""

    @property
    @abstractmethod
    def description(self) -> str:
        """Estimator description"""

    @property
    def category(self) -> str:
        return "general"

    @abstractmethod
    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        """Internal estimation method - implement this in subclasses"""

    def validate_inputs(self, inputs: EstimationInputs) -> None:
        if inputs.test.m != inputs.source.m:
            raise DimensionMismatch(
                f"test has {inputs.test.m} classes, source has {inputs.source.m}"
            )
        if inputs.validation is not None and inputs.validation.m != inputs.test.m:
            raise DimensionMismatch(
                f"validation has {inputs.validation.m} classes,"
                f" test has {inputs.test.m}"
            )
        if self.requires_validation:
            inputs.require_validation()

    def run(self, inputs: EstimationInputs) -> EstimateResult:
        """Validate inputs, estimate and log timing; errors propagate"""
        start_time = time.time()
        try:
            self.validate_inputs(inputs)
            result = self._estimate(inputs)
        except ShiftBenchError as e:
            performance_logger.log_estimator_performance(
                estimator=self.name,
                execution_time=time.time() - start_time,
                success=False,
                n_samples=inputs.test.n,
                n_classes=inputs.test.m,
            )
            self.logger.debug("Estimation failed", estimator=self.name, error=str(e))
            raise

        performance_logger.log_estimator_performance(
            estimator=self.name,
            execution_time=time.time() - start_time,
            success=True,
            n_samples=inputs.test.n,
            n_classes=inputs.test.m,
        )
        return result

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "category": self.category,
            "requires_validation": self.requires_validation,
            "requires_source": self.requires_source,
        }


def _weight_result(
    name: str, weights: ShiftWeights, source: ProbabilitySimplex, **diagnostics: float
) -> EstimateResult:
    implied = weights.w * source.probs
    return EstimateResult(
        estimator=name,
        distribution=ProbabilitySimplex(implied / implied.sum()),
        weights=weights,
        diagnostics=dict(diagnostics),
    )


class CountEstimator(BaseEstimator):
    """Classify and count"""

    requires_source = False

    @property
    def name(self) -> str:
        return "cc"

    @property
    def description(self) -> str:
        return "Frequency of predicted top labels"

    @property
    def category(self) -> str:
        return "counting"

    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        return estimate_cc(inputs.test)


class EmEstimator(BaseEstimator):
    """EM prior re-estimation"""

    @property
    def name(self) -> str:
        return "em"

    @property
    def description(self) -> str:
        return "Expectation-maximisation of the test prior"

    @property
    def category(self) -> str:
        return "likelihood"

    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        validation = inputs.validation.posteriors if inputs.validation else None
        return estimate_em(inputs.test, inputs.source, inputs.em, validation)


class LeipEstimator(BaseEstimator):
    """Incremental prior updates seeded by the confident subset"""

    @property
    def name(self) -> str:
        return "leip"

    @property
    def description(self) -> str:
        return "Incremental prior updates from a confident seed set"

    @property
    def category(self) -> str:
        return "likelihood"

    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        confusion = None
        if inputs.leip.auto_tau:
            validation = inputs.validation
            if validation is None:
                raise MissingValidation(
                    "automatic tau needs validation data; pass an explicit tau"
                )
            confusion = estimate_confusion(validation, PredictionMode.HARD)
        return estimate_leip(inputs.test, inputs.source, inputs.leip, confusion)


class BbslEstimator(BaseEstimator):
    """Black-box shift estimation with a hard confusion matrix"""

    requires_validation = True
    mode = PredictionMode.HARD

    @property
    def name(self) -> str:
        return "bbsl"

    @property
    def description(self) -> str:
        return "Inverse confusion matrix applied to the mean test prediction"

    @property
    def category(self) -> str:
        return "confusion"

    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        validation = inputs.require_validation()
        confusion = estimate_confusion(validation, self.mode)
        u_hat = mean_prediction(inputs.test, self.mode)
        source = inputs.validation_prior()
        weights = estimate_bbsl(confusion, u_hat, source)
        return _weight_result(
            self.name,
            weights,
            source,
            condition=float(np.linalg.cond(confusion.to_joint(source).entries)),
        )


class RllsEstimator(BbslEstimator):
    """Regularised least squares on the soft confusion matrix"""

    mode = PredictionMode.SOFT

    @property
    def name(self) -> str:
        return "rlls"

    @property
    def description(self) -> str:
        return "Ridge-regularised confusion solve shrinking towards no shift"

    def _estimate(self, inputs: EstimationInputs) -> EstimateResult:
        validation = inputs.require_validation()
        confusion = estimate_confusion(validation, self.mode)
        u_hat = mean_prediction(inputs.test, self.mode)
        source = inputs.validation_prior()
        weights = estimate_rlls(confusion, u_hat, source, inputs.rlls, validation.n)
        return _weight_result(
            self.name,
            weights,
            source,
            regularisation=inputs.rlls.regularisation(confusion.m, validation.n),
        )


class RllsHardEstimator(RllsEstimator):
    """RLLS fed with top predictions instead of posteriors"""

    mode = PredictionMode.HARD

    @property
    def name(self) -> str:
        return "rlls-hard"

    @property
    def description(self) -> str:
        return "RLLS on the hard confusion matrix and hard mean prediction"
