"""
Structured logging utilities for shiftbench

This module provides structured logging using structlog with rich formatting
for development and JSON formatting for production. Everything is written to
stderr: stdout is reserved for machine-readable command output.
"""

import sys
import logging
import uuid
from typing import Any, Dict, MutableMapping, Optional
import structlog
from rich.console import Console
from rich.logging import RichHandler

from ..config import get_config


class RunContext:
    """Stamps every event with the process run id and the configured base seed.

    Values already present on the event (a cell's own seed, say) win.
    """

    def __init__(self, run_id: str, seed: int) -> None:
        self.run_id = run_id
        self.seed = seed

    def __call__(
        self, logger: Any, method_name: str, event_dict: MutableMapping[str, Any]
    ) -> MutableMapping[str, Any]:
        event_dict.setdefault("run_id", self.run_id)
        event_dict.setdefault("seed", self.seed)
        return event_dict


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def bind_run_context(**values: Any) -> None:
    """Attach values to every later event from this thread of control"""
    structlog.contextvars.bind_contextvars(**values)


def setup_logging(run_id: Optional[str] = None) -> str:
    """Configure structured logging for the application, returning the run id"""
    config = get_config()
    run_id = run_id or new_run_id()

    # Configure standard library logging
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, config.log_level),
    )

    # Configure processors based on environment
    processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        RunContext(run_id, config.seed),
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    handler: logging.Handler
    if config.is_development():
        processors.extend(
            [
                structlog.processors.UnicodeDecoder(),
                structlog.dev.ConsoleRenderer(colors=True),
            ]
        )

        handler = RichHandler(
            console=Console(stderr=True),
            show_time=True,
            show_level=True,
            show_path=True,
            markup=True,
            rich_tracebacks=True,
        )

    else:
        processors.extend(
            [
                structlog.processors.dict_tracebacks,
                structlog.processors.JSONRenderer(),
            ]
        )

        handler = logging.StreamHandler(sys.stderr)

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(handler)
    root_logger.setLevel(getattr(logging, config.log_level))
    return run_id


def get_logger(name: Optional[str] = None) -> structlog.stdlib.BoundLogger:
    """Get a structured logger instance"""
    return structlog.get_logger(name)


class BenchmarkLogger:
    """Records the outcome of every benchmark cell"""

    def __init__(self) -> None:
        self.logger = get_logger("benchmark")

    def log_cell(
        self,
        alpha: float,
        run: int,
        estimator: str,
        calibration: str,
        validation_size: Optional[int] = None,
        mse: Optional[float] = None,
        n_test: Optional[int] = None,
        error: Optional[str] = None,
    ) -> None:
        """Log one benchmark cell result"""
        log = self.logger.warning if error else self.logger.debug
        log(
            "Benchmark cell",
            alpha=alpha,
            run=run,
            estimator=estimator,
            calibration=calibration,
            validation_size=validation_size,
            mse=mse,
            n_test=n_test,
            success=error is None,
            error=error,
            event_type="benchmark_cell",
        )

    def log_sweep(
        self,
        n_cells: int,
        n_failed: int,
        config_hash: str,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Log the summary of a completed sweep"""
        self.logger.info(
            "Benchmark sweep completed",
            n_cells=n_cells,
            n_failed=n_failed,
            config_hash=config_hash,
            metadata=metadata or {},
            event_type="benchmark_sweep",
        )


# Global benchmark logger instance
benchmark_logger = BenchmarkLogger()


class PerformanceLogger:
    """Performance logging for estimator and calibrator runs"""

    def __init__(self) -> None:
        self.logger = get_logger("performance")

    def log_estimator_performance(
        self,
        estimator: str,
        execution_time: float,
        success: bool,
        n_samples: Optional[int] = None,
        n_classes: Optional[int] = None,
    ) -> None:
        """Log estimator execution metrics"""
        self.logger.debug(
            "Estimator performance",
            estimator=estimator,
            execution_time=execution_time,
            success=success,
            n_samples=n_samples,
            n_classes=n_classes,
            event_type="performance",
        )

    def log_calibration_performance(
        self,
        kind: str,
        execution_time: float,
        iterations: int,
        converged: bool,
    ) -> None:
        """Log calibrator fitting metrics"""
        self.logger.debug(
            "Calibration performance",
            kind=kind,
            execution_time=execution_time,
            iterations=iterations,
            converged=converged,
            event_type="performance",
        )


# Global performance logger instance
performance_logger = PerformanceLogger()


def get_app_logger() -> structlog.stdlib.BoundLogger:
    """Get the main application logger"""
    return get_logger("shiftbench")
