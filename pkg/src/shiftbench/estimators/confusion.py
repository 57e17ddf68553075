"""
Confusion-matrix moment matching: BBSL and RLLS

Both solve against the joint confusion C(i, j) = p(pred i | y j) * p_s(j),
whose product with the weight vector is the predicted-label distribution on
the test batch.
"""

import numpy as np
from scipy import linalg

from ..core.errors import DegenerateSupport, DimensionMismatch, SingularConfusion
from ..core.types import ConfusionMatrix, FloatArray, ProbabilitySimplex, ShiftWeights
from ..utils.logging import get_logger
from .models import RllsConfig

logger = get_logger(__name__)

MAX_CONDITION = 1e12


def _joint(
    confusion: ConfusionMatrix, u_hat: ProbabilitySimplex, source: ProbabilitySimplex
) -> FloatArray:
    if u_hat.m != confusion.m or source.m != confusion.m:
        raise DimensionMismatch(
            "confusion, mean prediction and source must share m",
            confusion=confusion.m,
            u_hat=u_hat.m,
            source=source.m,
        )
    return confusion.to_joint(source).entries


def _check_condition(matrix: FloatArray) -> float:
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularConfusion(
            f"confusion matrix is singular (condition number {condition:.3g})",
            condition=condition,
        )
    return condition


def normalise_weights(raw: FloatArray, source: ProbabilitySimplex) -> ShiftWeights:
    """Clip negative weights to zero and rescale so sum(w * p_s) = 1"""
    clipped = np.maximum(raw, 0.0)
    mass = float(clipped @ source.probs)
    if mass <= 0:
        raise DegenerateSupport("every shift weight clipped to zero")
    return ShiftWeights(clipped / mass)


def solve_bbsl(
    confusion: ConfusionMatrix, u_hat: ProbabilitySimplex, source: ProbabilitySimplex
) -> FloatArray:
    """Unclipped solution of C_joint w = u_hat"""
    joint = _joint(confusion, u_hat, source)
    _check_condition(joint)
    return linalg.solve(joint, u_hat.probs)


def estimate_bbsl(
    confusion: ConfusionMatrix, u_hat: ProbabilitySimplex, source: ProbabilitySimplex
) -> ShiftWeights:
    return normalise_weights(solve_bbsl(confusion, u_hat, source), source)


def solve_rlls(
    confusion: ConfusionMatrix,
    u_hat: ProbabilitySimplex,
    source: ProbabilitySimplex,
    regularisation: float,
) -> FloatArray:
    """Ridge solution shrinking towards no shift, before clipping"""
    joint = _joint(confusion, u_hat, source)
    ones = np.ones(confusion.m)
    if regularisation == 0:
        _check_condition(joint)
        theta = linalg.solve(joint, u_hat.probs - joint @ ones)
    else:
        system = joint.T @ joint + regularisation * np.eye(confusion.m)
        _check_condition(system)
        theta = linalg.solve(
            system, joint.T @ (u_hat.probs - joint @ ones), assume_a="pos"
        )
    return ones + theta


def estimate_rlls(
    confusion: ConfusionMatrix,
    u_hat: ProbabilitySimplex,
    source: ProbabilitySimplex,
    cfg: RllsConfig | None = None,
    n_validation: int | None = None,
) -> ShiftWeights:
    cfg = cfg or RllsConfig()
    regularisation = cfg.regularisation(confusion.m, n_validation)
    logger.debug("RLLS regularisation", lam=regularisation, rule=str(cfg.rule))
    return normalise_weights(
        solve_rlls(confusion, u_hat, source, regularisation), source
    )
