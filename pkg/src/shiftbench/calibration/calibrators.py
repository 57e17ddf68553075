"""
Post-hoc logit calibrators

Four parametric maps are fitted by minimising the mean negative
log-likelihood of the validation labels:

    ts        softmax(z / T)
    bcts      softmax(z / T + b)
    vs        softmax(s * z + b)
    nbvs      softmax(s * z)

T and s are optimised through their logarithms so they stay positive, and
every fit starts from the identity map.
"""

import json
import time
from enum import StrEnum
from typing import Any, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import optimize, special

from ..core.errors import DimensionMismatch, InputValidationError, SingleClassBatch
from ..core.types import (
    FloatArray,
    IntArray,
    LabeledBatch,
    LogitMatrix,
    PosteriorMatrix,
)
from ..utils.logging import get_logger, performance_logger
from .metrics import DEFAULT_ECE_BINS, ece

logger = get_logger(__name__)

# Bounds on log T and log s keep exp() finite on separable data.
LOG_PARAM_BOUND = 20.0


class CalibratorKind(StrEnum):
    IDENTITY = "identity"
    TS = "ts"
    BCTS = "bcts"
    VS = "vs"
    NBVS = "nbvs"


class Calibrator(BaseModel):
    """Fitted calibration map; immutable once built"""

    model_config = ConfigDict(frozen=True)

    kind: CalibratorKind
    temperature: Optional[float] = Field(default=None, gt=0)
    scale: Optional[List[float]] = None
    bias: Optional[List[float]] = None

    @field_validator("kind", mode="before")
    @classmethod
    def normalise_kind(cls, v: Any) -> Any:
        return v.lower() if isinstance(v, str) else v

    @field_validator("scale")
    @classmethod
    def validate_scale(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(not np.isfinite(s) or s <= 0 for s in v):
            raise ValueError("scale entries must be positive")
        return v

    @model_validator(mode="after")
    def check_parameters(self) -> "Calibrator":
        kind = self.kind
        needs_temperature = kind in (CalibratorKind.TS, CalibratorKind.BCTS)
        needs_scale = kind in (CalibratorKind.VS, CalibratorKind.NBVS)
        needs_bias = kind in (CalibratorKind.BCTS, CalibratorKind.VS)
        if needs_temperature and self.temperature is None:
            raise ValueError(f"{kind} calibrator needs a temperature")
        if needs_scale and self.scale is None:
            raise ValueError(f"{kind} calibrator needs a scale vector")
        if needs_bias and self.bias is None:
            raise ValueError(f"{kind} calibrator needs a bias vector")
        if self.scale is not None and self.bias is not None:
            if len(self.scale) != len(self.bias):
                raise ValueError("scale and bias lengths differ")
        return self

    @classmethod
    def identity(cls) -> "Calibrator":
        return cls(kind=CalibratorKind.IDENTITY)

    @property
    def m(self) -> Optional[int]:
        """Class count the calibrator is tied to, if any"""
        for vector in (self.scale, self.bias):
            if vector is not None:
                return len(vector)
        return None

    def to_json(self) -> str:
        return self.model_dump_json(exclude_none=True)

    @classmethod
    def from_json(cls, text: str) -> "Calibrator":
        try:
            return cls.model_validate(json.loads(text))
        except ValueError as e:
            raise InputValidationError(f"invalid calibrator JSON: {e}") from e


class CalibrationReport(BaseModel):
    """Fit summary on the validation batch"""

    kind: CalibratorKind
    nll_before: float
    nll_after: float
    ece_before: float
    ece_after: float
    iterations: int
    converged: bool
    grad_norm: float = 0.0


def _n_params(kind: CalibratorKind, m: int) -> int:
    return {
        CalibratorKind.IDENTITY: 0,
        CalibratorKind.TS: 1,
        CalibratorKind.BCTS: 1 + m,
        CalibratorKind.VS: 2 * m,
        CalibratorKind.NBVS: m,
    }[kind]


Bound = Tuple[Optional[float], Optional[float]]


def _bounds(kind: CalibratorKind, m: int) -> List[Bound]:
    log_bound = (-LOG_PARAM_BOUND, LOG_PARAM_BOUND)
    free = (None, None)
    if kind is CalibratorKind.TS:
        return [log_bound]
    if kind is CalibratorKind.BCTS:
        return [log_bound] + [free] * m
    if kind is CalibratorKind.VS:
        return [log_bound] * m + [free] * m
    if kind is CalibratorKind.NBVS:
        return [log_bound] * m
    return []


def _unpack(
    kind: CalibratorKind, params: FloatArray, m: int
) -> Tuple[FloatArray, FloatArray]:
    """Return the per-column multiplier and bias encoded by ``params``"""
    ones, zeros = np.ones(m), np.zeros(m)
    if kind is CalibratorKind.TS:
        return np.full(m, np.exp(-params[0])), zeros
    if kind is CalibratorKind.BCTS:
        return np.full(m, np.exp(-params[0])), params[1:]
    if kind is CalibratorKind.VS:
        return np.exp(params[:m]), params[m:]
    if kind is CalibratorKind.NBVS:
        return np.exp(params), zeros
    return ones, zeros


def _to_calibrator(kind: CalibratorKind, params: FloatArray, m: int) -> Calibrator:
    multiplier, bias = _unpack(kind, params, m)
    if kind is CalibratorKind.TS:
        return Calibrator(kind=kind, temperature=float(np.exp(params[0])))
    if kind is CalibratorKind.BCTS:
        return Calibrator(
            kind=kind, temperature=float(np.exp(params[0])), bias=bias.tolist()
        )
    if kind is CalibratorKind.VS:
        return Calibrator(kind=kind, scale=multiplier.tolist(), bias=bias.tolist())
    if kind is CalibratorKind.NBVS:
        return Calibrator(kind=kind, scale=multiplier.tolist())
    return Calibrator.identity()


def _as_arrays(
    logits: LogitMatrix | FloatArray, labels: IntArray
) -> Tuple[FloatArray, IntArray]:
    z = logits.rows if isinstance(logits, LogitMatrix) else np.asarray(logits, float)
    y = np.asarray(labels, dtype=np.int64)
    return z, y


def nll_and_grad(
    kind: CalibratorKind | str,
    params: FloatArray,
    logits: LogitMatrix | FloatArray,
    labels: IntArray,
) -> Tuple[float, FloatArray]:
    """Mean NLL and its gradient in the log-positive parameterisation"""
    kind = CalibratorKind(kind)
    z, y = _as_arrays(logits, labels)
    n, m = z.shape
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (_n_params(kind, m),):
        raise DimensionMismatch(
            f"{kind} with {m} classes takes {_n_params(kind, m)} parameters,"
            f" got {params.shape}"
        )
    multiplier, bias = _unpack(kind, params, m)
    scaled = z * multiplier[None, :]
    adjusted = scaled + bias[None, :]
    log_norm = special.logsumexp(adjusted, axis=1)
    rows = np.arange(n)
    nll = float(np.mean(log_norm - adjusted[rows, y]))

    # G = d(nll)/d(adjusted)
    g = special.softmax(adjusted, axis=1)
    g[rows, y] -= 1.0
    g /= n

    if kind is CalibratorKind.TS:
        grad = np.array([-np.sum(g * scaled)])
    elif kind is CalibratorKind.BCTS:
        grad = np.concatenate([[-np.sum(g * scaled)], g.sum(axis=0)])
    elif kind is CalibratorKind.VS:
        grad = np.concatenate([np.sum(g * scaled, axis=0), g.sum(axis=0)])
    elif kind is CalibratorKind.NBVS:
        grad = np.sum(g * scaled, axis=0)
    else:
        grad = np.zeros(0)
    return nll, grad


def apply_calibrator(calibrator: Calibrator, logits: LogitMatrix) -> PosteriorMatrix:
    """Map logits to calibrated posteriors"""
    m = calibrator.m
    if m is not None and m != logits.m:
        raise DimensionMismatch(
            f"calibrator expects {m} classes, logits have {logits.m}",
            expected=m,
            actual=logits.m,
        )
    z = logits.rows
    if calibrator.temperature is not None:
        z = z / calibrator.temperature
    if calibrator.scale is not None:
        z = z * np.asarray(calibrator.scale)[None, :]
    if calibrator.bias is not None:
        z = z + np.asarray(calibrator.bias)[None, :]
    probs = special.softmax(z, axis=1)
    return PosteriorMatrix(probs / probs.sum(axis=1, keepdims=True))


def logits_from_probabilities(posteriors: PosteriorMatrix) -> LogitMatrix:
    """Elementwise log, floored at the smallest positive double"""
    tiny = np.finfo(np.float64).tiny
    return LogitMatrix(np.log(np.maximum(posteriors.rows, tiny)))


def fit_calibrator(
    kind: CalibratorKind | str,
    validation: LabeledBatch,
    max_iter: int = 10_000,
    grad_tol: float = 1e-7,
    ece_bins: int = DEFAULT_ECE_BINS,
) -> Tuple[Calibrator, CalibrationReport]:
    """Fit a calibrator on labeled validation logits.

    Never raises on non-convergence: the best parameters found are returned
    with ``converged=False``.
    """
    kind = CalibratorKind(kind)
    logits = validation.require_logits()
    labels = validation.labels
    if np.unique(labels).size < 2:
        raise SingleClassBatch(
            "calibration needs at least 2 distinct labels",
            label=int(labels[0]),
        )
    m = logits.m
    start_time = time.time()

    x0 = np.zeros(_n_params(kind, m))
    nll_before, _ = nll_and_grad(CalibratorKind.IDENTITY, np.zeros(0), logits, labels)
    before = apply_calibrator(Calibrator.identity(), logits)
    ece_before = ece(validation.with_posteriors(before), ece_bins)

    if kind is CalibratorKind.IDENTITY:
        calibrator = Calibrator.identity()
        report = CalibrationReport(
            kind=kind,
            nll_before=nll_before,
            nll_after=nll_before,
            ece_before=ece_before,
            ece_after=ece_before,
            iterations=0,
            converged=True,
        )
        return calibrator, report

    def objective(x: FloatArray) -> Tuple[float, FloatArray]:
        return nll_and_grad(kind, x, logits, labels)

    result = optimize.minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=_bounds(kind, m),
        options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 1e-15},
    )
    params = np.asarray(result.x, dtype=np.float64)
    nll_after, grad = nll_and_grad(kind, params, logits, labels)
    if not np.isfinite(nll_after) or nll_after > nll_before:
        params, nll_after = x0, nll_before
        grad = nll_and_grad(kind, x0, logits, labels)[1]
    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    converged = bool(result.success) or grad_norm <= grad_tol

    calibrator = _to_calibrator(kind, params, m)
    after = apply_calibrator(calibrator, logits)
    ece_after = ece(validation.with_posteriors(after), ece_bins)
    iterations = int(getattr(result, "nit", 0))

    if not converged:
        logger.warning(
            "Calibrator fit did not converge",
            kind=str(kind),
            iterations=iterations,
            grad_norm=grad_norm,
            message=str(result.message),
        )
    performance_logger.log_calibration_performance(
        kind=str(kind),
        execution_time=time.time() - start_time,
        iterations=iterations,
        converged=converged,
    )

    report = CalibrationReport(
        kind=kind,
        nll_before=nll_before,
        nll_after=nll_after,
        ece_before=ece_before,
        ece_after=ece_after,
        iterations=iterations,
        converged=converged,
        grad_norm=grad_norm,
    )
    return calibrator, report
