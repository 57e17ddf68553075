"""
Classify-and-count and mean test predictions
"""

import numpy as np

from ..core.types import PosteriorMatrix, PredictionMode, ProbabilitySimplex
from .models import EstimateResult


def mean_prediction(
    test: PosteriorMatrix, mode: PredictionMode | str = PredictionMode.SOFT
) -> ProbabilitySimplex:
    """Column means of the posteriors (soft) or of one-hot argmaxes (hard)"""
    mode = PredictionMode(mode)
    if mode is PredictionMode.HARD:
        counts = np.bincount(test.top_labels(), minlength=test.m)
        return ProbabilitySimplex(counts / test.n)
    means = test.rows.mean(axis=0)
    return ProbabilitySimplex(means / means.sum())


def estimate_cc(test: PosteriorMatrix) -> EstimateResult:
    """Frequency of predicted top labels; ties go to the lowest class index"""
    return EstimateResult(
        estimator="cc", distribution=mean_prediction(test, PredictionMode.HARD)
    )
