"""
Main entry point for shiftbench

This module provides the CLI interface. Commands print machine-readable JSON
on stdout; logs and the benchmark summary table go to stderr.

Exit codes: 0 success, 2 input error, 3 estimation error, 1 anything else.
"""

import json
import platform
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Sequence

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import __version__
from .calibration import (
    Calibrator,
    CalibratorKind,
    apply_calibrator,
    fit_calibrator,
    logits_from_probabilities,
)
from .config import ShiftBenchConfig, set_config
from .core import (
    EstimationError,
    InputValidationError,
    LabeledBatch,
    PosteriorMatrix,
    ProbabilitySimplex,
)
from .estimators import (
    EmConfig,
    EmInit,
    EstimationInputs,
    LeipConfig,
    RllsConfig,
    RllsRule,
    get_estimator_registry,
)
from .evaluation import (
    BenchmarkConfig,
    BenchmarkReport,
    WeightConvention,
    build_data_source,
    guard_source_prior,
    run_benchmark,
    source_prior,
    weights_from,
    write_report,
)
from .simulation import (
    GaussianOracle,
    cell_seed,
    distort,
    load_oracle,
    make_scenario,
    oracle_generate,
)
from .utils.files import (
    RunManifest,
    load_document,
    manifest_path_for,
    read_labels,
    read_logits,
    read_posteriors,
    read_simplex,
    write_labels,
    write_matrix,
)
from .utils.logging import bind_run_context, get_app_logger, setup_logging

EXIT_UNEXPECTED = 1
EXIT_INPUT = 2
EXIT_ESTIMATION = 3

# Seed stream keys for `simulate`
SIM_POOL_KEY = 0
SIM_VALIDATION_KEY = 1
SIM_SCENARIO_KEY = 2

FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


@contextmanager
def _exit_on_error(command: str) -> Iterator[None]:
    """Map library errors onto exit codes"""
    logger = get_app_logger()
    try:
        yield
    except InputValidationError as e:
        click.echo(f"Error: {e}", err=True)
        logger.debug("Input error", command=command, **e.to_dict())
        sys.exit(EXIT_INPUT)
    except ValidationError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_INPUT)
    except EstimationError as e:
        click.echo(f"Error: {e}", err=True)
        logger.debug("Estimation error", command=command, **e.to_dict())
        sys.exit(EXIT_ESTIMATION)
    except Exception as e:
        logger.error("Command failed", command=command, error=str(e), exc_info=True)
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_UNEXPECTED)


def _emit(data: Dict[str, Any]) -> None:
    click.echo(json.dumps(data, sort_keys=True, indent=2))


def _write_manifest(
    command: str,
    target: Optional[Path],
    inputs: Sequence[Optional[Path]],
    config: Dict[str, Any],
    seeds: Optional[Dict[str, Any]] = None,
) -> Optional[Path]:
    """Write the manifest to ``target``, or to stderr when there is no file"""
    manifest = RunManifest.for_inputs(
        command, __version__, inputs, config=config, seeds=seeds or {}
    )
    if target is None:
        click.echo(manifest.to_json(), err=True)
        return None
    return manifest.write(target)


def _load_calibrator(path: Path) -> Calibrator:
    """Accepts a bare calibrator or the full output of `calibrate`"""
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputValidationError(f"{path}: invalid JSON: {e}") from e
    if isinstance(data, dict) and "calibrator" in data:
        text = json.dumps(data["calibrator"])
    return Calibrator.from_json(text)


def _scores(
    path: Path, kind: str, calibrator: Optional[Calibrator], tol: float
) -> PosteriorMatrix:
    """Read a logit or posterior file and run it through the calibrator"""
    if kind == "logits":
        return apply_calibrator(calibrator or Calibrator.identity(), read_logits(path))
    posteriors = read_posteriors(path, tol)
    if calibrator is None:
        return posteriors
    return apply_calibrator(calibrator, logits_from_probabilities(posteriors))


@click.group()
@click.option(
    "--settings",
    "-s",
    type=FILE,
    help="Path to settings file (YAML)",
)
@click.option(
    "--debug",
    is_flag=True,
    help="Enable debug logging",
)
@click.option(
    "--environment",
    type=click.Choice(["development", "production"]),
    help="development renders logs with rich, production as JSON lines",
)
@click.pass_context
def cli(ctx, settings: Optional[Path], debug: bool, environment: Optional[str]):
    """shiftbench - label shift estimation, calibration and benchmarking"""

    # Load configuration
    if settings:
        try:
            config = ShiftBenchConfig.from_yaml(settings)
        except Exception as e:
            click.echo(f"Error loading settings: {e}", err=True)
            sys.exit(EXIT_INPUT)
    else:
        config = ShiftBenchConfig.from_env()

    # Apply CLI overrides
    if debug:
        config.log_level = "DEBUG"

    if environment:
        config.environment = environment

    set_config(config)
    setup_logging()
    bind_run_context(command=ctx.invoked_subcommand)

    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@cli.command()
@click.argument("test_file", type=FILE)
@click.option(
    "--estimator",
    "-e",
    default="em",
    show_default=True,
    type=click.Choice(get_estimator_registry().names()),
    help="Estimator to run",
)
@click.option(
    "--input-kind",
    type=click.Choice(["posteriors", "logits"]),
    default="posteriors",
    show_default=True,
    help="What the test and validation score files hold",
)
@click.option(
    "--source-prior",
    "source_prior_file",
    type=FILE,
    help="Source prior file (one row)",
)
@click.option("--validation-scores", type=FILE, help="Validation scores file")
@click.option("--validation-labels", type=FILE, help="Validation labels file")
@click.option("--calibrator", type=FILE, help="Calibrator JSON from `calibrate`")
@click.option("--tau", type=float, help="LEIP confidence threshold in (0, 1]")
@click.option(
    "--floor", type=float, help="LEIP lower bound on each running class probability"
)
@click.option("--em-tol", type=float, help="EM stopping tolerance")
@click.option("--em-max-iter", type=int, help="EM iteration cap")
@click.option(
    "--em-strict",
    is_flag=True,
    help="Fail with exit 3 when EM hits its iteration cap",
)
@click.option(
    "--em-init",
    type=click.Choice([EmInit.SOURCE_PRIOR.value, EmInit.SOFT_MEAN_VALIDATION.value]),
    help="EM starting prior (default: validation soft mean when available)",
)
@click.option("--rlls-alpha", type=float, help="RLLS alpha")
@click.option("--rlls-lambda", type=float, help="RLLS ridge strength override")
@click.option(
    "--rlls-rule",
    type=click.Choice([r.value for r in RllsRule]),
    help="How RLLS derives its ridge strength from alpha",
)
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also write the result JSON here",
)
@click.option(
    "--manifest",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Manifest path (default: next to --output, else stderr)",
)
@click.pass_context
def estimate(
    ctx,
    test_file: Path,
    estimator: str,
    input_kind: str,
    source_prior_file: Optional[Path],
    validation_scores: Optional[Path],
    validation_labels: Optional[Path],
    calibrator: Optional[Path],
    tau: Optional[float],
    floor: Optional[float],
    em_tol: Optional[float],
    em_max_iter: Optional[int],
    em_strict: bool,
    em_init: Optional[str],
    rlls_alpha: Optional[float],
    rlls_lambda: Optional[float],
    rlls_rule: Optional[str],
    output: Optional[Path],
    manifest: Optional[Path],
):
    """Estimate the class prior of an unlabeled test batch"""

    config: ShiftBenchConfig = ctx.obj["config"]
    settings = config.estimators
    tol = settings.simplex_ingest_tol

    with _exit_on_error("estimate"):
        if (validation_scores is None) != (validation_labels is None):
            raise InputValidationError(
                "--validation-scores and --validation-labels go together"
            )
        fitted = _load_calibrator(calibrator) if calibrator else None
        test = _scores(test_file, input_kind, fitted, tol)

        validation: Optional[LabeledBatch] = None
        if validation_scores is not None and validation_labels is not None:
            validation = LabeledBatch(
                labels=read_labels(validation_labels),
                posteriors=_scores(validation_scores, input_kind, fitted, tol),
            )

        registry = get_estimator_registry()
        has_source = source_prior_file is not None or validation is not None
        if source_prior_file is not None:
            source = read_simplex(source_prior_file, tol)
        elif validation is not None:
            source = guard_source_prior(
                source_prior(validation, WeightConvention.SOFT_MEAN), validation.n
            )
        elif not getattr(registry.get_estimator(estimator), "requires_source", True):
            source = ProbabilitySimplex.uniform(test.m)
        else:
            raise InputValidationError(
                f"{estimator} needs --source-prior or validation files"
            )

        em_overrides: Dict[str, Any] = {}
        if em_tol is not None:
            em_overrides["tol"] = em_tol
        if em_max_iter is not None:
            em_overrides["max_iter"] = em_max_iter
        if em_strict:
            em_overrides["strict"] = True
        if em_init is not None:
            em_overrides["init"] = em_init
        rlls_overrides: Dict[str, Any] = {}
        if rlls_alpha is not None:
            rlls_overrides["alpha"] = rlls_alpha
        if rlls_lambda is not None:
            rlls_overrides["lambda_override"] = rlls_lambda
        if rlls_rule is not None:
            rlls_overrides["rule"] = rlls_rule

        inputs = EstimationInputs(
            test=test,
            source=source,
            validation=validation,
            em=EmConfig.from_settings(settings, **em_overrides),
            leip=LeipConfig.from_settings(settings, tau=tau, floor=floor),
            rlls=RllsConfig.from_settings(settings, **rlls_overrides),
        )
        result = registry.estimate(estimator, inputs)

        data = result.to_dict()
        if validation is not None:
            # One weight vector per convention for measuring the source prior
            data["weights"] = {
                str(convention): weights_from(
                    result.distribution,
                    guard_source_prior(
                        source_prior(validation, convention), validation.n
                    ),
                ).tolist()
                for convention in WeightConvention
            }
        elif has_source:
            data["weights"] = {
                "source_prior": weights_from(result.distribution, source).tolist()
            }
        if has_source:
            data["source_prior"] = source.tolist()

        _emit(data)
        if output is not None:
            output.parent.mkdir(parents=True, exist_ok=True)
            output.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        _write_manifest(
            "estimate",
            manifest or (manifest_path_for(output) if output else None),
            [
                test_file,
                source_prior_file,
                validation_scores,
                validation_labels,
                calibrator,
            ],
            config={
                "estimator": estimator,
                "input_kind": input_kind,
                "em": inputs.em.model_dump(mode="json"),
                "leip": inputs.leip.model_dump(mode="json"),
                "rlls": inputs.rlls.model_dump(mode="json"),
            },
        )


@cli.command()
@click.argument("scores_file", type=FILE)
@click.argument("labels_file", type=FILE)
@click.option(
    "--method",
    "-m",
    type=click.Choice([k.value for k in CalibratorKind]),
    default=CalibratorKind.TS.value,
    show_default=True,
    help="Calibration map to fit",
)
@click.option(
    "--input-kind",
    type=click.Choice(["logits", "posteriors"]),
    default="logits",
    show_default=True,
    help="Posteriors are converted to logits by an elementwise log",
)
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the calibrator JSON here",
)
@click.option(
    "--manifest",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Manifest path (default: next to --output, else stderr)",
)
@click.pass_context
def calibrate(
    ctx,
    scores_file: Path,
    labels_file: Path,
    method: str,
    input_kind: str,
    output: Optional[Path],
    manifest: Optional[Path],
):
    """Fit a calibrator on labeled validation scores"""

    config: ShiftBenchConfig = ctx.obj["config"]
    settings = config.calibration

    with _exit_on_error("calibrate"):
        if input_kind == "logits":
            logits = read_logits(scores_file)
        else:
            logits = logits_from_probabilities(
                read_posteriors(scores_file, config.estimators.simplex_ingest_tol)
            )
        batch = LabeledBatch(labels=read_labels(labels_file), logits=logits)
        calibrator, report = fit_calibrator(
            method,
            batch,
            max_iter=settings.max_iter,
            grad_tol=settings.grad_tol,
            ece_bins=settings.ece_bins,
        )

        _emit(
            {
                "calibrator": json.loads(calibrator.to_json()),
                "report": report.model_dump(mode="json"),
            }
        )
        if output is not None:
            output.parent.mkdir(parents=True, exist_ok=True)
            output.write_text(calibrator.to_json() + "\n")
        _write_manifest(
            "calibrate",
            manifest or (manifest_path_for(output) if output else None),
            [scores_file, labels_file],
            config={
                "method": method,
                "input_kind": input_kind,
                "calibration": settings.model_dump(mode="json"),
            },
        )


@cli.command()
@click.option(
    "--alpha", "-a", type=float, required=True, help="Dirichlet concentration"
)
@click.option(
    "--classes",
    type=click.IntRange(min=2),
    default=3,
    show_default=True,
    help="Classes of the default oracle (ignored with --oracle-spec)",
)
@click.option(
    "--seed",
    type=click.IntRange(min=0),
    help="Base seed (default: settings seed, SHIFTBENCH_SEED)",
)
@click.option("--oracle-spec", type=FILE, help="Gaussian oracle spec (YAML or JSON)")
@click.option(
    "--n",
    "pool_size",
    type=click.IntRange(min=1),
    default=10_000,
    show_default=True,
    help="Test pool size before the shift subsample",
)
@click.option(
    "--validation-size",
    type=click.IntRange(min=1),
    default=2_000,
    show_default=True,
    help="Unshifted labeled validation batch size",
)
@click.option(
    "--temperature",
    type=float,
    default=1.0,
    show_default=True,
    help="Divide the oracle logits by this to simulate miscalibration",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Output directory",
)
@click.pass_context
def simulate(
    ctx,
    alpha: float,
    classes: int,
    seed: Optional[int],
    oracle_spec: Optional[Path],
    pool_size: int,
    validation_size: int,
    temperature: float,
    out: Path,
):
    """Generate a Dirichlet-shifted test batch from a Gaussian oracle"""

    config: ShiftBenchConfig = ctx.obj["config"]
    base_seed = config.seed if seed is None else seed
    logger = get_app_logger()

    with _exit_on_error("simulate"):
        oracle = (
            load_oracle(load_document(oracle_spec))
            if oracle_spec
            else GaussianOracle.default(classes)
        )
        seeds = {
            "base_seed": base_seed,
            "pool": cell_seed(base_seed, SIM_POOL_KEY),
            "validation": cell_seed(base_seed, SIM_VALIDATION_KEY),
            "scenario": cell_seed(base_seed, SIM_SCENARIO_KEY),
        }
        pool = distort(
            oracle_generate(oracle, None, pool_size, seeds["pool"]), temperature
        )
        validation = distort(
            oracle_generate(oracle, None, validation_size, seeds["validation"]),
            temperature,
        )
        scenario = make_scenario(pool.labels, alpha, seeds["scenario"], oracle.m)
        test = pool.take(scenario.selected_indices)

        out.mkdir(parents=True, exist_ok=True)
        files: Dict[str, Path] = {}
        for split, batch in (("test", test), ("validation", validation)):
            files[f"{split}_logits"] = out / f"{split}_logits.csv"
            files[f"{split}_posteriors"] = out / f"{split}_posteriors.csv"
            files[f"{split}_labels"] = out / f"{split}_labels.csv"
            write_matrix(files[f"{split}_logits"], batch.require_logits().rows)
            write_matrix(files[f"{split}_posteriors"], batch.require_posteriors().rows)
            write_labels(files[f"{split}_labels"], batch.labels)
        files["source_prior"] = out / "source_prior.csv"
        write_matrix(files["source_prior"], oracle.source_prior.probs)

        scenario_data = {
            **scenario.to_dict(),
            "realized_prior": scenario.realized_prior(pool.labels).tolist(),
            "source_prior": oracle.source_prior.tolist(),
            "temperature": temperature,
        }
        files["scenario"] = out / "scenario.json"
        files["scenario"].write_text(
            json.dumps(scenario_data, sort_keys=True, indent=2) + "\n"
        )
        logger.info(
            "Scenario written",
            alpha=alpha,
            n_total=scenario.n_total,
            out=str(out),
        )

        manifest_path = _write_manifest(
            "simulate",
            out / "manifest.json",
            [oracle_spec],
            config={
                "alpha": alpha,
                "oracle": oracle.model_dump(mode="json"),
                "pool_size": pool_size,
                "validation_size": validation_size,
                "temperature": temperature,
            },
            seeds=seeds,
        )
        _emit(
            {
                "scenario": scenario_data,
                "files": {name: str(path) for name, path in sorted(files.items())},
                "manifest": str(manifest_path),
            }
        )


def _print_summary(report: BenchmarkReport) -> None:
    """Mean weight MSE table on stderr"""
    table = Table(title="Weight MSE (x1e3)")
    table.add_column("alpha", justify="right")
    table.add_column("val. size", justify="right")
    table.add_column("calibration")
    table.add_column("estimator")
    table.add_column("mean", justify="right")
    table.add_column("std", justify="right")
    table.add_column("acc. gain", justify="right")
    table.add_column("ok/failed", justify="right")
    for row in report.summary:
        mean = "-" if row.mean_mse_e3 is None else f"{row.mean_mse_e3:.3f}"
        std = "-" if row.std_mse is None else f"{row.std_mse * 1e3:.3f}"
        gain = (
            "-" if row.mean_accuracy_gain is None else f"{row.mean_accuracy_gain:+.4f}"
        )
        table.add_row(
            f"{row.alpha:g}",
            str(row.validation_size),
            row.calibration,
            row.estimator,
            mean,
            std,
            gain,
            f"{row.n_ok}/{row.n_failed}",
        )
    Console(stderr=True).print(table)


@cli.command()
@click.option(
    "--config",
    "-c",
    "config_file",
    type=FILE,
    required=True,
    help="Benchmark sweep config (YAML or JSON)",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Output directory for report.json, report.csv and manifest.json",
)
@click.option(
    "--jobs",
    "-j",
    type=click.IntRange(min=1),
    help="Cells run concurrently (default: settings jobs)",
)
@click.option(
    "--seed",
    type=click.IntRange(min=0),
    help="Override the config base_seed",
)
@click.pass_context
def benchmark(
    ctx, config_file: Path, out: Path, jobs: Optional[int], seed: Optional[int]
):
    """Run a Dirichlet shift benchmark sweep"""

    config: ShiftBenchConfig = ctx.obj["config"]
    logger = get_app_logger()

    with _exit_on_error("benchmark"):
        cfg = BenchmarkConfig.from_file(config_file)
        # An explicit seed, or one set through the settings, wins over the file
        if seed is not None:
            cfg = cfg.model_copy(update={"base_seed": seed})
        elif "seed" in config.model_fields_set:
            cfg = cfg.model_copy(update={"base_seed": config.seed})

        data_source = build_data_source(cfg.data)
        report = run_benchmark(cfg, data_source, jobs or config.jobs)
        paths = write_report(report, out)
        _print_summary(report)

        data_files = [cfg.data.logits, cfg.data.posteriors, cfg.data.labels]
        manifest_path = _write_manifest(
            "benchmark",
            out / "manifest.json",
            [config_file, *data_files],
            config=cfg.canonical(),
            seeds={"base_seed": cfg.base_seed, "cells": report.metadata["seeds"]},
        )
        n_failed = sum(1 for r in report.records if r.error is not None)
        logger.info(
            "Benchmark written",
            out=str(out),
            records=len(report.records),
            failed=n_failed,
        )
        _emit(
            {
                "report": str(paths["json"]),
                "csv": str(paths["csv"]),
                "manifest": str(manifest_path),
                "config_hash": report.metadata["config_hash"],
                "records": len(report.records),
                "failed": n_failed,
            }
        )


@cli.command("list-estimators")
@click.option(
    "--category",
    help="Filter estimators by category",
)
def list_estimators(category: Optional[str]):
    """List available estimators"""

    registry = get_estimator_registry()
    _emit(
        {
            "categories": [category] if category else registry.list_categories(),
            "estimators": registry.list_estimators(category),
        }
    )


@cli.command()
@click.pass_context
def version(ctx):
    """Show version information"""

    config: ShiftBenchConfig = ctx.obj["config"]
    _emit(
        {
            "shiftbench": __version__,
            "python": platform.python_version(),
            "environment": config.environment,
        }
    )


def main():
    """Main entry point for the CLI"""
    cli()


if __name__ == "__main__":
    main()
