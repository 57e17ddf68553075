"""Weight metrics, adaptation metrics and the Dirichlet shift benchmark"""

from .benchmark import (
    ArraySource,
    BenchmarkConfig,
    BenchmarkReport,
    DataSource,
    DataSourceConfig,
    OracleSource,
    RunRecord,
    AggregateRow,
    aggregate,
    build_data_source,
    prepare_benchmark,
    run_benchmark,
    run_benchmark_async,
    run_cell,
    split_pool,
    split_pool_nested,
    write_report,
)
from .metrics import (
    MSE_REPORT_SCALE,
    AdaptationMetrics,
    WeightConvention,
    adaptation_metrics,
    adapted_predictions,
    guard_source_prior,
    mse_weights,
    source_prior,
    weights_from,
)

__all__ = [
    "ArraySource",
    "BenchmarkConfig",
    "BenchmarkReport",
    "DataSource",
    "DataSourceConfig",
    "OracleSource",
    "RunRecord",
    "AggregateRow",
    "aggregate",
    "build_data_source",
    "prepare_benchmark",
    "run_benchmark",
    "run_benchmark_async",
    "run_cell",
    "split_pool",
    "split_pool_nested",
    "write_report",
    "MSE_REPORT_SCALE",
    "AdaptationMetrics",
    "WeightConvention",
    "adaptation_metrics",
    "adapted_predictions",
    "guard_source_prior",
    "mse_weights",
    "source_prior",
    "weights_from",
]
