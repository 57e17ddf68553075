"""
Dirichlet shift benchmark

A labeled pool is split once into nested validation parts, one per configured
size, and a shared test pool. Calibrators are fitted on each validation part,
then every (alpha, run) cell draws a target prior, subsamples the test pool for
it and scores each (validation size, calibration, estimator) triple by the MSE
of the estimated shift weights and by the accuracy change after re-weighting.

Cells are independent and run concurrently; every random draw is seeded
from ``base_seed`` and the cell's (alpha index, run index), so the report is
the same for any degree of parallelism.
"""

import asyncio
import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import (
    Annotated,
    Any,
    Dict,
    List,
    Literal,
    Optional,
    Protocol,
    Sequence,
    Tuple,
)

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .. import __version__
from ..calibration.calibrators import (
    Calibrator,
    CalibratorKind,
    apply_calibrator,
    fit_calibrator,
    logits_from_probabilities,
)
from ..core.errors import InputValidationError, ShiftBenchError
from ..core.types import (
    LabeledBatch,
    LogitMatrix,
    PosteriorMatrix,
    ProbabilitySimplex,
)
from ..estimators.base_estimator import EstimationInputs
from ..estimators.models import EmConfig, LeipConfig, RllsConfig
from ..estimators.registry import get_estimator_registry
from ..simulation.dirichlet import cell_seed, make_rng, make_scenario
from ..simulation.oracle import GaussianOracle, oracle_generate
from ..utils.files import (
    config_hash,
    load_document,
    read_labels,
    read_logits,
    read_posteriors,
)
from ..utils.logging import benchmark_logger, get_logger
from .metrics import (
    MSE_REPORT_SCALE,
    WeightConvention,
    adaptation_metrics,
    guard_source_prior,
    mse_weights,
    source_prior,
    weights_from,
)

logger = get_logger(__name__)

# Seed stream keys under base_seed
POOL_KEY = 0
SPLIT_KEY = 1
CELL_KEY = 2

# Errors on one alpha report its list index
Alpha = Annotated[float, Field(gt=0, allow_inf_nan=False)]
ValidationSize = Annotated[int, Field(ge=1)]

DEFAULT_ESTIMATORS = ["cc", "em", "bbsl", "rlls", "rlls-hard", "leip"]
CSV_COLUMNS = [
    "alpha",
    "run",
    "estimator",
    "calibration",
    "validation_size",
    "mse",
    "n_test",
    "tau_used",
    "accuracy_before",
    "accuracy_after",
    "macro_recall_before",
    "macro_recall_after",
    "error",
]


class DataSourceConfig(BaseModel):
    """Where the labeled pool comes from"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["oracle", "arrays"] = "oracle"
    oracle: Optional[GaussianOracle] = None
    classes: int = Field(default=3, ge=2, description="Classes of the default oracle")
    pool_size: int = Field(default=32_000, ge=2)
    logits: Optional[Path] = None
    posteriors: Optional[Path] = None
    labels: Optional[Path] = None


class BenchmarkConfig(BaseModel):
    """A benchmark sweep"""

    model_config = ConfigDict(extra="forbid")

    alphas: List[Alpha] = Field(min_length=1)
    runs_per_alpha: int = Field(default=50, ge=1)
    estimators: List[str] = Field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    calibrations: List[CalibratorKind] = Field(
        default_factory=lambda: [CalibratorKind.IDENTITY]
    )
    base_seed: int = Field(default=0, ge=0)
    validation_size: List[ValidationSize] = Field(
        default_factory=lambda: [2_000], min_length=1
    )
    convention: WeightConvention = WeightConvention.SOFT_MEAN
    data: DataSourceConfig = Field(default_factory=DataSourceConfig)
    em: EmConfig = Field(default_factory=EmConfig)
    leip: LeipConfig = Field(default_factory=LeipConfig)
    rlls: RllsConfig = Field(default_factory=RllsConfig)

    @field_validator("estimators")
    @classmethod
    def validate_estimators(cls, v: List[str]) -> List[str]:
        registry = get_estimator_registry()
        for name in v:
            registry.validate_estimator_exists(name)
        return v

    @field_validator("calibrations", mode="before")
    @classmethod
    def normalise_calibrations(cls, v: Any) -> Any:
        if isinstance(v, list):
            return [
                "identity" if str(c).lower() == "none" else str(c).lower() for c in v
            ]
        return v

    @field_validator("validation_size", mode="before")
    @classmethod
    def listify_validation_size(cls, v: Any) -> Any:
        return [v] if isinstance(v, int) else v

    @field_validator("validation_size")
    @classmethod
    def validate_distinct_sizes(cls, v: List[int]) -> List[int]:
        if len(set(v)) != len(v):
            raise ValueError("validation sizes must be distinct")
        return v

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "BenchmarkConfig":
        """Validate a parsed document, reporting failures by JSON pointer"""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            pointer = "/" + "/".join(str(part) for part in first["loc"])
            raise InputValidationError(
                f"invalid benchmark config at {pointer}: {first['msg']}",
                pointer=pointer,
            ) from e

    @classmethod
    def from_file(cls, path: Path) -> "BenchmarkConfig":
        config = cls.from_mapping(load_document(path))
        data = config.data
        base = Path(path).parent
        resolved = {
            name: base / value
            for name in ("logits", "posteriors", "labels")
            if (value := getattr(data, name)) is not None and not value.is_absolute()
        }
        if resolved:
            config = config.model_copy(
                update={"data": data.model_copy(update=resolved)}
            )
        return config

    def canonical(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class DataSource(Protocol):
    def pool(self, seed: int) -> LabeledBatch: ...

    def describe(self) -> Dict[str, Any]: ...


@dataclass(frozen=True)
class OracleSource:
    """Pool drawn from a Gaussian oracle under its own prior"""

    oracle: GaussianOracle
    pool_size: int

    def pool(self, seed: int) -> LabeledBatch:
        return oracle_generate(self.oracle, None, self.pool_size, seed)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "oracle", "m": self.oracle.m, "pool_size": self.pool_size}


@dataclass(frozen=True)
class ArraySource:
    """Pool of precomputed logits and/or posteriors with labels"""

    batch: LabeledBatch

    def pool(self, seed: int) -> LabeledBatch:
        return self.batch

    def describe(self) -> Dict[str, Any]:
        return {"kind": "arrays", "m": self.batch.m, "pool_size": self.batch.n}


def build_data_source(cfg: DataSourceConfig) -> DataSource:
    if cfg.kind == "oracle":
        oracle = cfg.oracle or GaussianOracle.default(cfg.classes)
        return OracleSource(oracle=oracle, pool_size=cfg.pool_size)
    if cfg.labels is None or (cfg.logits is None and cfg.posteriors is None):
        raise InputValidationError(
            "array data needs labels plus logits or posteriors",
            pointer="/data",
        )
    logits = read_logits(cfg.logits) if cfg.logits else None
    posteriors = read_posteriors(cfg.posteriors) if cfg.posteriors else None
    labels = read_labels(cfg.labels)
    return ArraySource(
        LabeledBatch(labels=labels, posteriors=posteriors, logits=logits)
    )


class RunRecord(BaseModel):
    """One (alpha, run, validation size, calibration, estimator) outcome"""

    alpha: float
    run: int
    estimator: str
    calibration: str
    seed: int
    validation_size: int = 0
    mse: Optional[float] = None
    n_test: int = 0
    tau_used: Optional[float] = None
    accuracy_before: Optional[float] = None
    accuracy_after: Optional[float] = None
    macro_recall_before: Optional[float] = None
    macro_recall_after: Optional[float] = None
    error: Optional[str] = None


class AggregateRow(BaseModel):
    alpha: float
    estimator: str
    calibration: str
    validation_size: int
    mean_mse: Optional[float]
    std_mse: Optional[float]
    mean_mse_e3: Optional[float]
    mean_accuracy_gain: Optional[float]
    mean_macro_recall_gain: Optional[float]
    n_ok: int
    n_failed: int
    per_run_mse: List[float]


def _optional(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


class BenchmarkReport(BaseModel):
    records: List[RunRecord]
    summary: List[AggregateRow]
    metadata: Dict[str, Any]

    def cell(
        self,
        alpha: float,
        estimator: str,
        calibration: str = "identity",
        validation_size: Optional[int] = None,
    ) -> AggregateRow:
        """Aggregate row for a cell; the first validation size when none is given"""
        for row in self.summary:
            if (row.alpha, row.estimator, row.calibration) != (
                alpha,
                estimator,
                calibration,
            ):
                continue
            if validation_size is None or row.validation_size == validation_size:
                return row
        raise KeyError((alpha, estimator, calibration, validation_size))

    def to_dict(self, include_timestamp: bool = True) -> Dict[str, Any]:
        data = self.model_dump(mode="json")
        if not include_timestamp:
            data["metadata"].pop("created_at", None)
        return data

    def to_json(self, include_timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(include_timestamp), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(
                [
                    repr(r.alpha),
                    r.run,
                    r.estimator,
                    r.calibration,
                    r.validation_size,
                    _optional(r.mse),
                    r.n_test,
                    _optional(r.tau_used),
                    _optional(r.accuracy_before),
                    _optional(r.accuracy_after),
                    _optional(r.macro_recall_before),
                    _optional(r.macro_recall_after),
                    r.error or "",
                ]
            )
        return buffer.getvalue()


@dataclass(frozen=True)
class CalibratedSplit:
    """Validation and test-pool posteriors under one calibration method"""

    calibration: str
    validation_size: int
    validation: Optional[LabeledBatch]
    test_pool: Optional[PosteriorMatrix]
    estimator_source: Optional[ProbabilitySimplex]
    weight_source: Optional[ProbabilitySimplex]
    error: Optional[str] = None


@dataclass(frozen=True)
class PreparedBenchmark:
    pool: LabeledBatch
    validation_indices: Tuple[np.ndarray, ...]
    test_indices: np.ndarray
    splits: Tuple[CalibratedSplit, ...]

    @property
    def test_labels(self) -> np.ndarray:
        return self.pool.labels[self.test_indices]


def split_pool_nested(
    n: int, validation_sizes: Sequence[int], seed: int
) -> Tuple[List[np.ndarray], np.ndarray]:
    """Seeded split into nested validation index sets and one shared test pool.

    Each validation set is a prefix of the same permutation, so smaller sets are
    subsets of larger ones; the test pool is whatever the largest set leaves.
    """
    largest = max(validation_sizes)
    if largest >= n:
        raise InputValidationError(
            f"validation_size {largest} must be below the pool size {n}",
            pointer="/validation_size",
        )
    order = make_rng(seed).permutation(n)
    validation = [np.sort(order[:size]) for size in validation_sizes]
    return validation, np.sort(order[largest:])


def split_pool(
    n: int, validation_size: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded permutation split into (validation, test pool) indices"""
    validation, test = split_pool_nested(n, [validation_size], seed)
    return validation[0], test


def _pool_logits(pool: LabeledBatch) -> LogitMatrix:
    if pool.logits is not None:
        return pool.logits
    return logits_from_probabilities(pool.require_posteriors())


def calibrate_split(
    pool: LabeledBatch,
    validation_indices: np.ndarray,
    test_indices: np.ndarray,
    kind: CalibratorKind,
    convention: WeightConvention,
) -> CalibratedSplit:
    """Fit ``kind`` on the validation rows and calibrate the whole pool"""
    name = str(kind)
    size = int(validation_indices.size)
    try:
        if kind is CalibratorKind.IDENTITY and pool.posteriors is not None:
            posteriors = pool.posteriors
        else:
            logits = _pool_logits(pool)
            if kind is CalibratorKind.IDENTITY:
                calibrator = Calibrator.identity()
            else:
                calibrator, report = fit_calibrator(
                    kind,
                    LabeledBatch(
                        labels=pool.labels[validation_indices],
                        logits=logits.take(validation_indices),
                    ),
                )
                logger.info(
                    "Calibrator fitted",
                    kind=name,
                    nll_before=report.nll_before,
                    nll_after=report.nll_after,
                    converged=report.converged,
                )
            posteriors = apply_calibrator(calibrator, logits)
        validation = LabeledBatch(
            labels=pool.labels[validation_indices],
            posteriors=posteriors.take(validation_indices),
        )
        estimator_source = source_prior(validation, WeightConvention.SOFT_MEAN)
        weight_source = guard_source_prior(
            source_prior(validation, convention), validation.n
        )
    except ShiftBenchError as e:
        logger.warning(
            "Calibration failed", kind=name, validation_size=size, error=str(e)
        )
        return CalibratedSplit(
            calibration=name,
            validation_size=size,
            validation=None,
            test_pool=None,
            estimator_source=None,
            weight_source=None,
            error=str(e),
        )
    return CalibratedSplit(
        calibration=name,
        validation_size=size,
        validation=validation,
        test_pool=posteriors.take(test_indices),
        estimator_source=estimator_source,
        weight_source=weight_source,
    )


def prepare_benchmark(
    cfg: BenchmarkConfig, data_source: DataSource
) -> PreparedBenchmark:
    pool = data_source.pool(cell_seed(cfg.base_seed, POOL_KEY))
    validation_indices, test_indices = split_pool_nested(
        pool.n, cfg.validation_size, cell_seed(cfg.base_seed, SPLIT_KEY)
    )
    splits = tuple(
        calibrate_split(pool, indices, test_indices, kind, cfg.convention)
        for indices in validation_indices
        for kind in cfg.calibrations
    )
    return PreparedBenchmark(pool, tuple(validation_indices), test_indices, splits)


def run_cell(
    prepared: PreparedBenchmark,
    cfg: BenchmarkConfig,
    alpha_index: int,
    run_index: int,
) -> List[RunRecord]:
    """Score every (validation size, calibration, estimator) on one Dirichlet shift"""
    alpha = cfg.alphas[alpha_index]
    seed = cell_seed(cfg.base_seed, CELL_KEY, alpha_index, run_index)
    base = {"alpha": alpha, "run": run_index, "seed": seed}
    registry = get_estimator_registry()

    try:
        scenario = make_scenario(prepared.test_labels, alpha, seed, prepared.pool.m)
        test_labels = prepared.test_labels[scenario.selected_indices]
        realized = ProbabilitySimplex(
            np.bincount(test_labels, minlength=prepared.pool.m) / test_labels.size
        )
    except ShiftBenchError as e:
        return [
            RunRecord(
                **base,
                estimator=name,
                calibration=split.calibration,
                validation_size=split.validation_size,
                error=str(e),
            )
            for split in prepared.splits
            for name in cfg.estimators
        ]

    records: List[RunRecord] = []
    n_test = scenario.n_total
    for split in prepared.splits:
        split_keys = {
            "calibration": split.calibration,
            "validation_size": split.validation_size,
        }
        if split.error is not None:
            records.extend(
                RunRecord(
                    **base,
                    **split_keys,
                    estimator=name,
                    n_test=n_test,
                    error=split.error,
                )
                for name in cfg.estimators
            )
            continue
        assert split.test_pool is not None and split.weight_source is not None
        assert split.estimator_source is not None
        inputs = EstimationInputs(
            test=split.test_pool.take(scenario.selected_indices),
            source=split.estimator_source,
            validation=split.validation,
            em=cfg.em,
            leip=cfg.leip,
            rlls=cfg.rlls,
        )
        test_batch = LabeledBatch(labels=test_labels, posteriors=inputs.test)
        truth = weights_from(realized, split.weight_source)
        for name in cfg.estimators:
            try:
                result = registry.estimate(name, inputs)
                estimated = weights_from(result.distribution, split.weight_source)
                adaptation = adaptation_metrics(
                    test_batch,
                    weights_from(result.distribution, split.estimator_source),
                    split.estimator_source,
                )
                record = RunRecord(
                    **base,
                    **split_keys,
                    **adaptation.to_dict(),
                    estimator=name,
                    mse=mse_weights(estimated, truth),
                    n_test=n_test,
                    tau_used=result.tau_used,
                )
            except (ShiftBenchError, np.linalg.LinAlgError) as e:
                record = RunRecord(
                    **base,
                    **split_keys,
                    estimator=name,
                    n_test=n_test,
                    error=f"{type(e).__name__}: {e}",
                )
            benchmark_logger.log_cell(
                alpha=alpha,
                run=run_index,
                estimator=name,
                calibration=split.calibration,
                validation_size=split.validation_size,
                mse=record.mse,
                n_test=n_test,
                error=record.error,
            )
            records.append(record)
    return records


def _mean_gain(
    group: List[RunRecord], before: str, after: str
) -> Optional[float]:
    gains = [
        getattr(r, after) - getattr(r, before)
        for r in group
        if getattr(r, after) is not None and getattr(r, before) is not None
    ]
    return float(np.mean(gains)) if gains else None


def aggregate(cfg: BenchmarkConfig, records: List[RunRecord]) -> List[AggregateRow]:
    """Statistics per (alpha, validation size, calibration, estimator) cell"""
    rows: List[AggregateRow] = []
    for alpha in cfg.alphas:
        for size in cfg.validation_size:
            for kind in cfg.calibrations:
                for name in cfg.estimators:
                    key = (alpha, size, str(kind), name)
                    group = [
                        r
                        for r in records
                        if (r.alpha, r.validation_size, r.calibration, r.estimator)
                        == key
                    ]
                    rows.append(_aggregate_row(key, group))
    return rows


def _aggregate_row(
    key: Tuple[float, int, str, str], group: List[RunRecord]
) -> AggregateRow:
    alpha, size, calibration, name = key
    values = [r.mse for r in group if r.mse is not None]
    mean = float(np.mean(values)) if values else None
    return AggregateRow(
        alpha=alpha,
        estimator=name,
        calibration=calibration,
        validation_size=size,
        mean_mse=mean,
        std_mse=float(np.std(values)) if values else None,
        mean_mse_e3=None if mean is None else mean * MSE_REPORT_SCALE,
        mean_accuracy_gain=_mean_gain(group, "accuracy_before", "accuracy_after"),
        mean_macro_recall_gain=_mean_gain(
            group, "macro_recall_before", "macro_recall_after"
        ),
        n_ok=len(values),
        n_failed=len(group) - len(values),
        per_run_mse=values,
    )


def _cell_keys(cfg: BenchmarkConfig) -> List[Tuple[int, int]]:
    return [
        (a, r) for a in range(len(cfg.alphas)) for r in range(cfg.runs_per_alpha)
    ]


def build_report(
    cfg: BenchmarkConfig,
    data_source: DataSource,
    cell_results: List[List[RunRecord]],
) -> BenchmarkReport:
    records = [record for cell in cell_results for record in cell]
    summary = aggregate(cfg, records)
    canonical = cfg.canonical()
    digest = config_hash(canonical)
    metadata = {
        "config": canonical,
        "config_hash": digest,
        "base_seed": cfg.base_seed,
        "seeds": {
            f"{a}:{r}": cell_seed(cfg.base_seed, CELL_KEY, a, r)
            for a, r in _cell_keys(cfg)
        },
        "data_source": data_source.describe(),
        "scale_note": "mean_mse_e3 is mean MSE x 1e3",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    n_failed = sum(1 for r in records if r.error is not None)
    benchmark_logger.log_sweep(
        n_cells=len(records),
        n_failed=n_failed,
        config_hash=digest,
        metadata={"alphas": cfg.alphas, "runs_per_alpha": cfg.runs_per_alpha},
    )
    return BenchmarkReport(records=records, summary=summary, metadata=metadata)


async def run_benchmark_async(
    cfg: BenchmarkConfig, data_source: DataSource, jobs: int = 1
) -> BenchmarkReport:
    """Run all cells with at most ``jobs`` in flight"""
    loop = asyncio.get_running_loop()
    jobs = max(1, jobs)
    logger.info(
        "Starting benchmark",
        alphas=cfg.alphas,
        runs_per_alpha=cfg.runs_per_alpha,
        estimators=cfg.estimators,
        calibrations=[str(c) for c in cfg.calibrations],
        jobs=jobs,
    )

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        prepared = await loop.run_in_executor(
            executor, prepare_benchmark, cfg, data_source
        )
        semaphore = asyncio.Semaphore(jobs)

        async def run_one(alpha_index: int, run_index: int) -> List[RunRecord]:
            async with semaphore:
                return await loop.run_in_executor(
                    executor, run_cell, prepared, cfg, alpha_index, run_index
                )

        # gather preserves submission order, so results stay in key order
        cell_results = await asyncio.gather(
            *(run_one(a, r) for a, r in _cell_keys(cfg))
        )

    return build_report(cfg, data_source, list(cell_results))


def run_benchmark(
    cfg: BenchmarkConfig, data_source: Optional[DataSource] = None, jobs: int = 1
) -> BenchmarkReport:
    """Synchronous entry point; builds the data source from ``cfg`` if omitted"""
    source = data_source or build_data_source(cfg.data)
    return asyncio.run(run_benchmark_async(cfg, source, jobs))


def write_report(report: BenchmarkReport, out_dir: Path) -> Dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"json": out_dir / "report.json", "csv": out_dir / "report.csv"}
    paths["json"].write_text(report.to_json() + "\n")
    paths["csv"].write_text(report.to_csv())
    return paths
