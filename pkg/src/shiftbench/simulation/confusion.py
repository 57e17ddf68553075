"""Confusion matrix estimation on a labeled validation batch"""

import numpy as np

from ..core.errors import ClassWithNoValidationSamples
from ..core.types import ConfusionKind, ConfusionMatrix, LabeledBatch, PredictionMode


def estimate_confusion(
    validation: LabeledBatch, mode: PredictionMode | str = PredictionMode.HARD
) -> ConfusionMatrix:
    """Conditional confusion p(pred i | label j) from validation posteriors.

    Hard mode counts argmaxes; soft mode averages the posterior rows of each
    label. Every class must appear at least once among the labels.
    """
    mode = PredictionMode(mode)
    posteriors = validation.require_posteriors()
    m = posteriors.m
    counts = validation.class_counts()
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ClassWithNoValidationSamples(
            f"class {int(missing[0])} has no validation samples",
            class_index=int(missing[0]),
            missing=[int(c) for c in missing],
        )

    one_hot_labels = np.eye(m)[validation.labels]
    if mode is PredictionMode.HARD:
        predictions = np.eye(m)[posteriors.top_labels()]
    else:
        predictions = posteriors.rows
    # (pred, label) sums, columns normalised by label counts
    entries = predictions.T @ one_hot_labels / counts[None, :]
    entries = entries / entries.sum(axis=0, keepdims=True)
    return ConfusionMatrix(entries, kind=ConfusionKind.CONDITIONAL)
