"""
Shared fixtures for the shiftbench test suite
"""

from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pytest
import structlog

from shiftbench.config import reload_config
from shiftbench.core import LabeledBatch, PosteriorMatrix, ProbabilitySimplex
from shiftbench.simulation import GaussianOracle, oracle_generate
from shiftbench.utils.files import write_labels, write_matrix
from shiftbench.utils.logging import setup_logging


@pytest.fixture(scope="session", autouse=True)
def configure_logging():
    """Route structlog through stderr before any module logger is first used"""
    reload_config()
    setup_logging()


@pytest.fixture(autouse=True)
def clean_config(monkeypatch):
    """Each test starts from environment defaults"""
    for key in ("SHIFTBENCH_SEED", "SHIFTBENCH_ENVIRONMENT", "SHIFTBENCH_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    reload_config()
    yield
    structlog.contextvars.clear_contextvars()
    reload_config()
    setup_logging()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def uniform2() -> ProbabilitySimplex:
    return ProbabilitySimplex([0.5, 0.5])


@pytest.fixture
def oracle() -> GaussianOracle:
    return GaussianOracle.default(3)


@pytest.fixture
def oracle_batch(oracle: GaussianOracle) -> LabeledBatch:
    """3-class oracle batch under the oracle's own uniform prior"""
    return oracle_generate(oracle, None, 3_000, seed=7)


@pytest.fixture
def random_posteriors(rng) -> Callable[[int, int], PosteriorMatrix]:
    def make(n: int, m: int) -> PosteriorMatrix:
        rows = rng.dirichlet(np.ones(m), size=n)
        return PosteriorMatrix(rows / rows.sum(axis=1, keepdims=True))

    return make


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[..., Path]:
    """Write a matrix CSV under tmp_path and return its path"""

    def write(name: str, rows, header: Sequence[str] | None = None) -> Path:
        path = tmp_path / name
        write_matrix(path, np.asarray(rows, dtype=np.float64), header)
        return path

    return write


@pytest.fixture
def write_label_file(tmp_path: Path) -> Callable[[str, Sequence[int]], Path]:
    def write(name: str, labels: Sequence[int]) -> Path:
        path = tmp_path / name
        write_labels(path, np.asarray(labels))
        return path

    return write
