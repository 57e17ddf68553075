"""
EM prior estimation

E step: re-weight each test posterior by p(y) / p_s(y) and renormalise.
M step: the new prior is the mean of the re-weighted posteriors.
"""

from typing import Optional

import numpy as np

from ..core.errors import DimensionMismatch, MissingValidation, NoConvergence
from ..core.prior_update import prior_ratio, reweight_rows
from ..core.types import PosteriorMatrix, ProbabilitySimplex
from ..utils.logging import get_logger
from .models import EmConfig, EmInit, EstimateResult

logger = get_logger(__name__)

MONOTONICITY_TOL = 1e-10


def em_objective(
    test: PosteriorMatrix, source: ProbabilitySimplex, prior: ProbabilitySimplex
) -> float:
    """Mean log-likelihood of the test batch under ``prior``, up to a constant"""
    ratio = prior_ratio(source, prior)
    with np.errstate(divide="ignore"):
        return float(np.mean(np.log(test.rows @ ratio)))


def _initial_prior(
    test: PosteriorMatrix,
    source: ProbabilitySimplex,
    cfg: EmConfig,
    validation: Optional[PosteriorMatrix],
) -> ProbabilitySimplex:
    init = cfg.init
    if init is None:
        init = (
            EmInit.SOURCE_PRIOR
            if validation is None
            else EmInit.SOFT_MEAN_VALIDATION
        )
    if init is EmInit.SOURCE_PRIOR:
        return source
    if init is EmInit.EXPLICIT:
        prior = cfg.explicit()
    else:
        if validation is None:
            raise MissingValidation(
                "SoftMeanValidation init needs validation posteriors"
            )
        means = validation.rows.mean(axis=0)
        prior = ProbabilitySimplex(means / means.sum())
    if prior.m != test.m:
        raise DimensionMismatch(
            f"initial prior has {prior.m} classes, test has {test.m}"
        )
    return prior


def estimate_em(
    test: PosteriorMatrix,
    source: ProbabilitySimplex,
    cfg: Optional[EmConfig] = None,
    validation: Optional[PosteriorMatrix] = None,
) -> EstimateResult:
    """Alternate E and M steps until the L1 change drops below ``cfg.tol``.

    Hitting ``cfg.max_iter`` is not an error unless ``cfg.strict`` is set; the
    result then carries ``diagnostics["converged"] == 0``.
    """
    cfg = cfg or EmConfig()
    if test.m != source.m:
        raise DimensionMismatch(
            f"test has {test.m} classes, source has {source.m}"
        )
    prior_ratio(source, source)  # rejects zero source entries
    prior = _initial_prior(test, source, cfg, validation)

    trace = [em_objective(test, source, prior)]
    converged = False
    change = float("inf")
    iterations = 0
    decreases = 0
    for iterations in range(1, cfg.max_iter + 1):
        reweighted = reweight_rows(test.rows, prior.probs / source.probs)
        updated = reweighted.mean(axis=0)
        updated = updated / updated.sum()
        change = float(np.abs(updated - prior.probs).sum())
        prior = ProbabilitySimplex(updated)
        trace.append(em_objective(test, source, prior))
        if trace[-1] < trace[-2] - MONOTONICITY_TOL:
            decreases += 1
            logger.warning(
                "EM objective decreased",
                iteration=iterations,
                before=trace[-2],
                after=trace[-1],
            )
        if change < cfg.tol:
            converged = True
            break

    if not converged and cfg.strict:
        raise NoConvergence(
            f"EM did not converge within {cfg.max_iter} iterations",
            max_iter=cfg.max_iter,
            last_change=change,
        )
    if not converged:
        logger.warning(
            "EM reached max_iter without converging",
            max_iter=cfg.max_iter,
            last_change=change,
        )
    logger.debug("EM finished", iterations=iterations, converged=converged)

    return EstimateResult(
        estimator="em",
        distribution=prior,
        iterations=iterations,
        diagnostics={
            "converged": float(converged),
            "final_change": change,
            "objective": trace[-1],
            "objective_decreases": float(decreases),
        },
        trace=trace,
    )
