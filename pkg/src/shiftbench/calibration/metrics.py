"""
Calibration diagnostics

Binned calibration errors use equal-width bins over [0, 1]; a value p falls
into bin ``ceil(p * bins) - 1`` so bin edges are right-closed and p = 0
lands in the first bin.
"""

from dataclasses import dataclass

import numpy as np

from ..core.errors import DimensionMismatch, InputValidationError
from ..core.prior_update import batch_prior_update
from ..core.types import (
    FloatArray,
    IntArray,
    LabeledBatch,
    PosteriorMatrix,
    ProbabilitySimplex,
)

DEFAULT_ECE_BINS = 15


def _bin_index(values: FloatArray, bins: int) -> IntArray:
    if bins < 1:
        raise InputValidationError(f"bins must be >= 1, got {bins}", bins=bins)
    idx = np.ceil(values * bins).astype(np.int64) - 1
    return np.clip(idx, 0, bins - 1)


def _binned_gap(scores: FloatArray, hits: FloatArray, bins: int) -> float:
    idx = _bin_index(scores, bins)
    score_sum = np.bincount(idx, weights=scores, minlength=bins)
    hit_sum = np.bincount(idx, weights=hits, minlength=bins)
    return float(np.abs(hit_sum - score_sum).sum() / scores.shape[0])


def ece(batch: LabeledBatch, bins: int = DEFAULT_ECE_BINS) -> float:
    """Top-label expected calibration error"""
    posteriors = batch.require_posteriors()
    confidence = posteriors.top_probs()
    correct = (posteriors.top_labels() == batch.labels).astype(np.float64)
    return _binned_gap(confidence, correct, bins)


def classwise_calibration_error(
    batch: LabeledBatch, bins: int = DEFAULT_ECE_BINS
) -> FloatArray:
    """Binned calibration error of each posterior column against its label indicator"""
    posteriors = batch.require_posteriors()
    errors = np.empty(posteriors.m)
    for i in range(posteriors.m):
        indicator = (batch.labels == i).astype(np.float64)
        errors[i] = _binned_gap(posteriors.rows[:, i], indicator, bins)
    return errors


@dataclass(frozen=True)
class ReliabilityCurve:
    """Per-bin statistics; empty bins report zero confidence and accuracy"""

    edges: FloatArray
    confidence: FloatArray
    accuracy: FloatArray
    counts: IntArray

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "confidence": self.confidence.tolist(),
            "accuracy": self.accuracy.tolist(),
            "counts": self.counts.tolist(),
        }


def reliability_curve(
    batch: LabeledBatch, bins: int = DEFAULT_ECE_BINS
) -> ReliabilityCurve:
    posteriors = batch.require_posteriors()
    confidence = posteriors.top_probs()
    correct = (posteriors.top_labels() == batch.labels).astype(np.float64)
    idx = _bin_index(confidence, bins)
    counts = np.bincount(idx, minlength=bins)
    safe = np.maximum(counts, 1)
    return ReliabilityCurve(
        edges=np.linspace(0.0, 1.0, bins + 1),
        confidence=np.bincount(idx, weights=confidence, minlength=bins) / safe,
        accuracy=np.bincount(idx, weights=correct, minlength=bins) / safe,
        counts=counts.astype(np.int64),
    )


def top_label_shift_agreement(
    estimated: PosteriorMatrix,
    oracle: PosteriorMatrix,
    source: ProbabilitySimplex,
    target: ProbabilitySimplex,
) -> float:
    """Fraction of rows whose updated argmax matches the exact posterior's.

    Only meaningful when ``oracle`` holds true Bayes posteriors, e.g. from
    :class:`shiftbench.simulation.GaussianOracle`.
    """
    if estimated.rows.shape != oracle.rows.shape:
        raise DimensionMismatch(
            f"estimated {estimated.rows.shape} vs oracle {oracle.rows.shape}"
        )
    updated_estimate = batch_prior_update(estimated, source, target)
    updated_oracle = batch_prior_update(oracle, source, target)
    agree = updated_estimate.top_labels() == updated_oracle.top_labels()
    return float(agree.mean())
