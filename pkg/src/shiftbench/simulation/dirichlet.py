"""
Dirichlet label shift scenarios

Target priors are drawn from a symmetric Dirichlet and a test batch is cut
from a labeled pool, without replacement, at the largest size the drawn
prior allows.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from ..core.errors import (
    DimensionMismatch,
    DimensionTooSmall,
    EmptyInput,
    InvalidAlpha,
    MissingRequiredClass,
)
from ..core.types import FloatArray, IntArray, ProbabilitySimplex

SeedLike = int | np.random.SeedSequence


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based generator so draws are reproducible across platforms"""
    return np.random.Generator(np.random.Philox(seed))


def cell_seed(base_seed: int, *keys: int) -> int:
    """Derive an independent 63-bit seed for one benchmark cell"""
    state = np.random.SeedSequence([base_seed, *keys]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def sample_dirichlet_priors(
    alpha: float, m: int, seed: SeedLike, size: int
) -> FloatArray:
    """``size`` draws from Dir(alpha, ..., alpha), one per row.

    Gamma variates are drawn in log space as log G(a + 1) + log(U) / a, which
    stays finite for tiny ``alpha`` where plain Gamma draws underflow.
    """
    if not np.isfinite(alpha) or alpha <= 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha!r}", alpha=alpha)
    if m < 2:
        raise DimensionTooSmall(f"need at least 2 classes, got {m}", m=m)
    rng = make_rng(seed)
    log_gamma = np.log(rng.standard_gamma(alpha + 1.0, size=(size, m)))
    log_gamma += np.log(rng.random(size=(size, m))) / alpha
    draws = special.softmax(log_gamma, axis=1)
    return draws / draws.sum(axis=1, keepdims=True)


def sample_dirichlet_prior(alpha: float, m: int, seed: SeedLike) -> ProbabilitySimplex:
    return ProbabilitySimplex(sample_dirichlet_priors(alpha, m, seed, 1)[0])


def class_quotas(counts: IntArray, target: ProbabilitySimplex) -> IntArray:
    """Per-class sample counts at the maximum feasible test size.

    Remainders go to the largest fractional parts (lowest class index first
    on ties) without exceeding what each class has available.
    """
    support = target.probs > 0
    missing = np.flatnonzero(support & (counts == 0))
    if missing.size:
        raise MissingRequiredClass(
            f"class {int(missing[0])} has target mass but no pool samples",
            class_index=int(missing[0]),
        )
    n_total = int(np.floor(np.min(counts[support] / target.probs[support]) + 1e-9))
    exact = n_total * target.probs
    quotas = np.minimum(np.floor(exact + 1e-9).astype(np.int64), counts)
    remainder = n_total - int(quotas.sum())
    for i in np.argsort(-(exact - quotas), kind="stable"):
        if remainder <= 0:
            break
        if quotas[i] < counts[i] and target.probs[i] > 0:
            quotas[i] += 1
            remainder -= 1
    return quotas


def subsample_without_replacement(
    labels: ArrayLike, target: ProbabilitySimplex, seed: SeedLike
) -> IntArray:
    """Sorted pool indices whose label mix follows ``target`` as closely as possible"""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyInput("cannot subsample an empty label pool")
    if labels.min() < 0 or labels.max() >= target.m:
        raise DimensionMismatch(
            f"labels must lie in [0, {target.m})", m=target.m
        )
    counts = np.bincount(labels, minlength=target.m)
    quotas = class_quotas(counts, target)
    rng = make_rng(seed)
    chosen = [
        rng.choice(np.flatnonzero(labels == i), size=int(q), replace=False)
        for i, q in enumerate(quotas)
        if q > 0
    ]
    if not chosen:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(chosen)).astype(np.int64)


@dataclass(frozen=True)
class DirichletShiftScenario:
    """One Dirichlet shift: a target prior and the pool rows drawn for it"""

    alpha: float
    seed: int
    target_prior: ProbabilitySimplex
    selected_indices: IntArray

    @property
    def n_total(self) -> int:
        return int(self.selected_indices.shape[0])

    def realized_prior(self, labels: ArrayLike) -> ProbabilitySimplex:
        picked = np.asarray(labels, dtype=np.int64)[self.selected_indices]
        return ProbabilitySimplex(
            np.bincount(picked, minlength=self.target_prior.m) / picked.size
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "seed": self.seed,
            "target_prior": self.target_prior.tolist(),
            "n_total": self.n_total,
        }


def make_scenario(
    labels: ArrayLike, alpha: float, seed: int, m: Optional[int] = None
) -> DirichletShiftScenario:
    """Draw a target prior and subsample ``labels`` for it"""
    labels = np.asarray(labels, dtype=np.int64)
    if m is None:
        m = int(labels.max()) + 1 if labels.size else 0
    prior_seed, sample_seed = np.random.SeedSequence(seed).spawn(2)
    target = sample_dirichlet_prior(alpha, m, prior_seed)
    indices = subsample_without_replacement(labels, target, sample_seed)
    return DirichletShiftScenario(
        alpha=float(alpha),
        seed=int(seed),
        target_prior=target,
        selected_indices=indices,
    )
