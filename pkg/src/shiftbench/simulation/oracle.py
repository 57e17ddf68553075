"""
Gaussian oracle with exact Bayes posteriors

Class-conditional features are spherical Gaussians with a shared variance,
so the posterior has a closed form. Posteriors are always computed under the
oracle's own prior, which is what a classifier trained on the source
distribution reports when the test labels are drawn from a shifted prior.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special

from ..core.errors import (
    DimensionMismatch,
    EmptyBatch,
    InputValidationError,
    InvalidTemperature,
)
from ..core.types import (
    FloatArray,
    IntArray,
    LabeledBatch,
    LogitMatrix,
    PosteriorMatrix,
    ProbabilitySimplex,
)
from .dirichlet import SeedLike, make_rng


class GaussianOracle(BaseModel):
    """m spherical Gaussian classes in d dimensions"""

    model_config = ConfigDict(frozen=True)

    means: List[List[float]]
    sigma: float = Field(default=1.0, gt=0)
    prior: Optional[List[float]] = None

    @field_validator("means")
    @classmethod
    def validate_means(cls, v: List[List[float]]) -> List[List[float]]:
        if len(v) < 2:
            raise ValueError("an oracle needs at least 2 class means")
        if len({len(mu) for mu in v}) != 1 or len(v[0]) < 1:
            raise ValueError("all class means must share a positive dimension")
        return v

    @model_validator(mode="after")
    def validate_prior(self) -> "GaussianOracle":
        if self.prior is not None:
            if len(self.prior) != len(self.means):
                raise ValueError("prior length must equal the number of means")
            if any(p <= 0 for p in self.prior) or abs(sum(self.prior) - 1) > 1e-6:
                raise ValueError("oracle prior must be strictly positive and sum to 1")
        return self

    @classmethod
    def default(
        cls, m: int = 3, separation: float = 3.0, sigma: float = 1.0
    ) -> "GaussianOracle":
        """Means evenly spaced on a circle of radius ``separation``"""
        angles = [2 * math.pi * i / m for i in range(m)]
        means = [[separation * math.cos(a), separation * math.sin(a)] for a in angles]
        return cls(means=means, sigma=sigma)

    @property
    def m(self) -> int:
        return len(self.means)

    @property
    def d(self) -> int:
        return len(self.means[0])

    @property
    def mean_array(self) -> FloatArray:
        return np.asarray(self.means, dtype=np.float64)

    @property
    def source_prior(self) -> ProbabilitySimplex:
        if self.prior is None:
            return ProbabilitySimplex.uniform(self.m)
        prior = np.asarray(self.prior, dtype=np.float64)
        return ProbabilitySimplex(prior / prior.sum())

    def log_posterior_at(self, x: ArrayLike) -> FloatArray:
        points = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if points.shape[1] != self.d:
            raise DimensionMismatch(
                f"points have dimension {points.shape[1]}, oracle has {self.d}"
            )
        sq_dist = ((points[:, None, :] - self.mean_array[None, :, :]) ** 2).sum(axis=2)
        log_joint = np.log(self.source_prior.probs)[None, :] - sq_dist / (
            2 * self.sigma**2
        )
        return log_joint - special.logsumexp(log_joint, axis=1, keepdims=True)

    def posterior_at(self, x: ArrayLike) -> PosteriorMatrix:
        """Exact Bayes posteriors at the given points"""
        probs = np.exp(self.log_posterior_at(x))
        return PosteriorMatrix(probs / probs.sum(axis=1, keepdims=True))

    def sample(
        self, prior: ProbabilitySimplex, n: int, seed: SeedLike
    ) -> Tuple[FloatArray, IntArray]:
        """Draw (features, labels) with labels from ``prior``"""
        if n < 1:
            raise EmptyBatch(f"sample size must be >= 1, got {n}")
        if prior.m != self.m:
            raise DimensionMismatch(
                f"prior has {prior.m} classes, oracle has {self.m}"
            )
        rng = make_rng(seed)
        labels = rng.choice(self.m, size=n, p=prior.probs).astype(np.int64)
        noise = rng.standard_normal(size=(n, self.d))
        return self.mean_array[labels] + self.sigma * noise, labels


def oracle_generate(
    oracle: GaussianOracle,
    prior: Optional[ProbabilitySimplex],
    n: int,
    seed: SeedLike,
) -> LabeledBatch:
    """Labeled batch with exact posteriors and their logs as logits"""
    x, labels = oracle.sample(prior or oracle.source_prior, n, seed)
    log_post = oracle.log_posterior_at(x)
    probs = np.exp(log_post)
    return LabeledBatch(
        labels=labels,
        posteriors=PosteriorMatrix(probs / probs.sum(axis=1, keepdims=True)),
        logits=LogitMatrix(log_post),
    )


def distort(batch: LabeledBatch, temperature: float) -> LabeledBatch:
    """Divide logits by ``temperature`` and recompute the posteriors"""
    if not np.isfinite(temperature) or temperature <= 0:
        raise InvalidTemperature(
            f"temperature must be positive, got {temperature!r}",
            temperature=temperature,
        )
    logits = batch.require_logits()
    if temperature == 1:
        return batch
    scaled = logits.rows / temperature
    probs = special.softmax(scaled, axis=1)
    return LabeledBatch(
        labels=batch.labels,
        posteriors=PosteriorMatrix(probs / probs.sum(axis=1, keepdims=True)),
        logits=LogitMatrix(scaled),
    )


def load_oracle(data: dict) -> GaussianOracle:
    """Build an oracle from a parsed YAML or JSON mapping"""
    try:
        return GaussianOracle.model_validate(data)
    except ValueError as e:
        raise InputValidationError(f"invalid oracle spec: {e}") from e
