"""Utilities package for shiftbench"""

from .logging import (
    RunContext,
    bind_run_context,
    setup_logging,
    get_logger,
    get_app_logger,
    benchmark_logger,
    performance_logger,
    BenchmarkLogger,
    PerformanceLogger,
)

__all__ = [
    "RunContext",
    "bind_run_context",
    "setup_logging",
    "get_logger",
    "get_app_logger",
    "benchmark_logger",
    "performance_logger",
    "BenchmarkLogger",
    "PerformanceLogger",
]
