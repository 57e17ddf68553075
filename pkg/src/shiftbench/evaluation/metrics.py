"""
Shift weights, weight error and adaptation metrics
"""

from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Dict

import numpy as np

from ..core.errors import DimensionMismatch
from ..core.prior_update import prior_ratio
from ..core.types import (
    FloatArray,
    IntArray,
    LabeledBatch,
    ProbabilitySimplex,
    ShiftWeights,
)

MSE_REPORT_SCALE = 1e3


class WeightConvention(StrEnum):
    """How the source prior behind the weights is measured on validation data"""

    SOFT_MEAN = "soft_mean"
    HARD_COUNT = "hard_count"


def source_prior(
    validation: LabeledBatch, convention: WeightConvention | str
) -> ProbabilitySimplex:
    """Soft mean of validation posteriors, or hard label frequencies.

    Hard counts may contain zeros; pass the result through
    :func:`guard_source_prior` before dividing by it.
    """
    convention = WeightConvention(convention)
    if convention is WeightConvention.HARD_COUNT:
        return ProbabilitySimplex(validation.class_counts() / validation.n)
    means = validation.require_posteriors().rows.mean(axis=0)
    return ProbabilitySimplex(means / means.sum())


def guard_source_prior(
    prior: ProbabilitySimplex, n_validation: int
) -> ProbabilitySimplex:
    """Floor zero entries at 1 / (2 * n_validation) and renormalise"""
    if prior.is_strictly_positive():
        return prior
    floored = np.maximum(prior.probs, 1.0 / (2 * max(n_validation, 1)))
    return ProbabilitySimplex(floored / floored.sum())


def weights_from(
    distribution: ProbabilitySimplex, source: ProbabilitySimplex
) -> ShiftWeights:
    return ShiftWeights(prior_ratio(source, distribution))


def mse_weights(estimated: ShiftWeights, truth: ShiftWeights) -> float:
    if estimated.m != truth.m:
        raise DimensionMismatch(
            f"estimated weights have {estimated.m} classes, truth has {truth.m}"
        )
    return float(np.mean((estimated.w - truth.w) ** 2))


@dataclass(frozen=True)
class AdaptationMetrics:
    accuracy_before: float
    accuracy_after: float
    macro_recall_before: float
    macro_recall_after: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _macro_recall(predicted: IntArray, labels: IntArray, m: int) -> float:
    support = np.bincount(labels, minlength=m)
    hits = np.bincount(labels[predicted == labels], minlength=m)
    present = support > 0
    return float(np.mean(hits[present] / support[present]))


def adapted_predictions(rows: FloatArray, weights: ShiftWeights) -> IntArray:
    """Argmax after scaling posterior columns by the weights.

    Rows whose mass vanishes keep their original prediction.
    """
    scaled = rows * weights.w[None, :]
    predicted = np.argmax(scaled, axis=1)
    dead = scaled.sum(axis=1) <= 0
    predicted[dead] = np.argmax(rows[dead], axis=1)
    return predicted.astype(np.int64)


def adaptation_metrics(
    test: LabeledBatch, weights: ShiftWeights, source: ProbabilitySimplex
) -> AdaptationMetrics:
    """Accuracy and macro recall before and after re-weighting the test posteriors"""
    posteriors = test.require_posteriors()
    if weights.m != posteriors.m:
        raise DimensionMismatch(
            f"weights have {weights.m} classes, test has {posteriors.m}"
        )
    prior_ratio(source, source)  # rejects zero source entries
    before = posteriors.top_labels()
    after = adapted_predictions(posteriors.rows, weights)
    labels = test.labels
    m = posteriors.m
    return AdaptationMetrics(
        accuracy_before=float(np.mean(before == labels)),
        accuracy_after=float(np.mean(after == labels)),
        macro_recall_before=_macro_recall(before, labels, m),
        macro_recall_after=_macro_recall(after, labels, m),
    )
