"""
Bayes prior update

Re-weights posteriors estimated under a source prior so they reflect a new
target prior: entry i is proportional to (target_i / source_i) * posterior_i.
"""

from typing import Optional

import numpy as np

from .errors import DegenerateSupport, DimensionMismatch, ZeroSourceEntry
from .types import FloatArray, PosteriorMatrix, ProbabilitySimplex


def prior_ratio(
    source: ProbabilitySimplex, target: ProbabilitySimplex
) -> FloatArray:
    """Elementwise target/source; zero source entries are rejected"""
    if source.m != target.m:
        raise DimensionMismatch(
            f"source has {source.m} classes, target has {target.m}",
            source=source.m,
            target=target.m,
        )
    zero = np.flatnonzero(source.probs <= 0)
    if zero.size:
        raise ZeroSourceEntry(
            f"source prior entry {int(zero[0])} is zero", class_index=int(zero[0])
        )
    return target.probs / source.probs


def reweight_rows(rows: FloatArray, ratio: FloatArray) -> FloatArray:
    """Scale columns by ``ratio`` and renormalise each row.

    Raises DegenerateSupport with the first offending row index when a
    row's mass vanishes entirely.
    """
    scaled = rows * ratio[None, :]
    norm = scaled.sum(axis=1)
    zero = np.flatnonzero(norm <= 0)
    if zero.size:
        raise DegenerateSupport(
            f"prior update normaliser is zero at row {int(zero[0])}",
            row=int(zero[0]),
        )
    return scaled / norm[:, None]


def prior_update(
    posterior: ProbabilitySimplex,
    source: ProbabilitySimplex,
    target: ProbabilitySimplex,
) -> ProbabilitySimplex:
    """Update one posterior from ``source`` to ``target``"""
    if posterior.m != source.m:
        raise DimensionMismatch(
            f"posterior has {posterior.m} classes, source has {source.m}"
        )
    ratio = prior_ratio(source, target)
    if np.array_equal(source.probs, target.probs):
        return ProbabilitySimplex(posterior.probs)
    try:
        updated = reweight_rows(posterior.probs[None, :], ratio)
    except DegenerateSupport:
        raise DegenerateSupport(
            "target prior vanishes on the posterior's support"
        ) from None
    return ProbabilitySimplex(updated[0])


def batch_prior_update(
    posteriors: PosteriorMatrix,
    source: ProbabilitySimplex,
    target: ProbabilitySimplex,
    ratio: Optional[FloatArray] = None,
) -> PosteriorMatrix:
    """Row-wise :func:`prior_update`; rows never interact.

    ``ratio`` may be passed precomputed (e.g. shift weights standing in for
    target/source); ``target`` is then only used for the identity check.
    """
    if posteriors.m != source.m:
        raise DimensionMismatch(
            f"posteriors have {posteriors.m} classes, source has {source.m}"
        )
    if ratio is None:
        ratio = prior_ratio(source, target)
        if np.array_equal(source.probs, target.probs):
            return posteriors
    return PosteriorMatrix(reweight_rows(posteriors.rows, ratio))
