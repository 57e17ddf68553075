"""
LEIP: label estimation by incremental prior updates

Confident test rows (top probability >= tau) seed a hard-count label
distribution. The remaining rows are visited from most to least confident;
each is prior-updated with the running distribution and its new argmax is
added to the count. A final pass re-updates every row with the resulting
distribution and hard-counts the argmaxes.
"""

import math
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ..core.errors import (
    DimensionMismatch,
    EmptyConfidentSet,
    EmptyInput,
    InputValidationError,
    MissingValidation,
)
from ..core.prior_update import prior_ratio
from ..core.types import (
    ConfusionKind,
    ConfusionMatrix,
    FloatArray,
    PosteriorMatrix,
    ProbabilitySimplex,
)
from ..utils.logging import get_logger
from .models import EstimateResult, LeipConfig

logger = get_logger(__name__)


def tau_fraction(
    confusion: ConfusionMatrix, recall_floor: float = 0.3
) -> Tuple[float, float, bool]:
    """Admitted fraction from the recalls: (fraction, min recall, fell back)"""
    if confusion.kind is not ConfusionKind.CONDITIONAL:
        raise InputValidationError("tau selection needs a conditional confusion matrix")
    recalls = confusion.recalls()
    min_recall = float(recalls.min())
    if min_recall < recall_floor:
        return float(recalls.mean()), min_recall, True
    return min_recall, min_recall, False


def percentile_value(top_probs: FloatArray, fraction: float) -> float:
    """Nearest-rank value admitting the top ``fraction`` of ``top_probs``"""
    values = np.sort(np.asarray(top_probs, dtype=np.float64))[::-1]
    n = values.shape[0]
    if n == 0:
        raise EmptyInput("no test probabilities to select tau from")
    index = math.ceil(fraction * n - 1e-9) - 1
    return float(values[min(max(index, 0), n - 1)])


def select_tau(
    confusion: ConfusionMatrix,
    test_top_probs: FloatArray,
    recall_floor: float = 0.3,
) -> float:
    """Threshold at the min-recall percentile of the test top-1 probabilities.

    Falls back to the mean recall when the minimum recall is below
    ``recall_floor``.
    """
    if np.asarray(test_top_probs).size == 0:
        raise EmptyInput("no test probabilities to select tau from")
    fraction, _, _ = tau_fraction(confusion, recall_floor)
    return percentile_value(test_top_probs, fraction)


def _floored(counts: FloatArray, floor: Optional[float]) -> FloatArray:
    dist = counts / counts.sum()
    if floor is None:
        return dist
    dist = np.maximum(dist, floor)
    return dist / dist.sum()


def _skewness(values: FloatArray) -> float:
    if values.size < 3 or np.ptp(values) == 0:
        return 0.0
    return float(stats.skew(values))


def estimate_leip(
    test: PosteriorMatrix,
    source: ProbabilitySimplex,
    cfg: Optional[LeipConfig] = None,
    confusion: Optional[ConfusionMatrix] = None,
) -> EstimateResult:
    cfg = cfg or LeipConfig()
    if test.m != source.m:
        raise DimensionMismatch(f"test has {test.m} classes, source has {source.m}")
    m = test.m
    prior_ratio(source, source)  # rejects zero source entries
    if cfg.floor is not None and not 0 < cfg.floor < 1.0 / m:
        raise InputValidationError(
            f"floor must lie in (0, 1/{m})", floor=cfg.floor
        )

    top = test.top_probs()
    labels = test.top_labels()
    diagnostics: dict[str, float] = {}

    if cfg.tau is not None:
        tau = cfg.tau
    else:
        if confusion is None:
            raise MissingValidation(
                "automatic tau needs a confusion matrix; pass validation data or tau"
            )
        if confusion.m != m:
            raise DimensionMismatch(
                f"confusion has {confusion.m} classes, test has {m}"
            )
        fraction, min_recall, fell_back = tau_fraction(confusion, cfg.recall_floor)
        tau = percentile_value(top, fraction)
        diagnostics["min_recall"] = min_recall
        diagnostics["tau_fallback"] = float(fell_back)
        if fell_back:
            logger.warning(
                "Minimum recall below floor, tau uses mean recall",
                min_recall=min_recall,
                recall_floor=cfg.recall_floor,
            )

    confident = top >= tau
    n_confident = int(confident.sum())
    if n_confident == 0:
        raise EmptyConfidentSet(
            f"no test row reaches tau={tau!r}; lower tau", tau=tau
        )

    counts = np.bincount(labels[confident], minlength=m).astype(np.float64)
    inv_source = 1.0 / source.probs

    # Most confident first; ties keep ascending row order.
    rest = np.flatnonzero(~confident)
    order = rest[np.argsort(-top[rest], kind="stable")]

    degenerate = 0
    running = _floored(counts, cfg.floor)
    for k in order:
        scaled = test.rows[k] * (running * inv_source)
        if scaled.sum() > 0:
            label = int(np.argmax(scaled))
        else:
            label = int(labels[k])
            degenerate += 1
        counts[label] += 1.0
        running = _floored(counts, cfg.floor)

    final_scaled = test.rows * (running * inv_source)[None, :]
    final_labels = np.argmax(final_scaled, axis=1)
    dead = final_scaled.sum(axis=1) <= 0
    if dead.any():
        final_labels[dead] = labels[dead]
        degenerate += int(dead.sum())
    estimate = np.bincount(final_labels, minlength=m) / test.n

    diagnostics.update(
        {
            "tau": float(tau),
            "confident_fraction": n_confident / test.n,
            "top_prob_skew": _skewness(top),
            "degenerate_updates": float(degenerate),
        }
    )
    logger.debug(
        "LEIP finished",
        tau=tau,
        n_confident=n_confident,
        n_incremental=int(order.size),
    )
    return EstimateResult(
        estimator="leip",
        distribution=ProbabilitySimplex(estimate),
        tau_used=float(tau),
        diagnostics=diagnostics,
    )
