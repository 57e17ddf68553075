"""
shiftbench

Label shift estimation from black-box classifier outputs. Estimates the
class prior of an unlabeled test batch with classify-and-count, EM,
confusion-matrix methods (BBSL, RLLS) and incremental prior updates (LEIP),
fits post-hoc calibrators, and benchmarks everything under Dirichlet shift.

License: GPL-2.0
Version: 1.0.0
"""

__version__ = "1.0.0"
__license__ = "GPL-2.0"

# Only import configuration by default; numerical modules load on demand
from .config.settings import ShiftBenchConfig


def get_estimator_registry():
    """Lazy import of the estimator registry"""
    from .estimators.registry import get_estimator_registry as _get

    return _get()


def get_benchmark_runner():
    """Lazy import of the benchmark entry point"""
    from .evaluation.benchmark import run_benchmark

    return run_benchmark


__all__ = [
    "ShiftBenchConfig",
    "get_estimator_registry",
    "get_benchmark_runner",
    "__version__",
    "__license__",
]
