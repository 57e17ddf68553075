"""Scenario generation: Dirichlet shift, subsampling, Gaussian oracle, confusion"""

from .confusion import estimate_confusion
from .dirichlet import (
    DirichletShiftScenario,
    cell_seed,
    class_quotas,
    make_rng,
    make_scenario,
    sample_dirichlet_prior,
    sample_dirichlet_priors,
    subsample_without_replacement,
)
from .oracle import GaussianOracle, distort, load_oracle, oracle_generate

__all__ = [
    "estimate_confusion",
    "DirichletShiftScenario",
    "cell_seed",
    "class_quotas",
    "make_rng",
    "make_scenario",
    "sample_dirichlet_prior",
    "sample_dirichlet_priors",
    "subsample_without_replacement",
    "GaussianOracle",
    "distort",
    "load_oracle",
    "oracle_generate",
]
