"""
Probability types shared by every shiftbench module

All types wrap read-only float64 numpy arrays and validate their invariants
on construction. Class identity is positional: column ``i`` is class ``i``.
"""

from dataclasses import dataclass
from enum import StrEnum
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    EmptyBatch,
    InputValidationError,
    NegativeEntry,
    NonFiniteLogits,
    SumOutOfTolerance,
)

# Internal invariants are tight; ingestion tolerates CSV rounding noise.
SIMPLEX_TOL = 1e-9
INGEST_TOL = 1e-6

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]


class ConfusionKind(StrEnum):
    CONDITIONAL = "conditional"
    JOINT = "joint"


class PredictionMode(StrEnum):
    """Soft uses posterior rows, hard uses one-hot argmaxes"""

    SOFT = "soft"
    HARD = "hard"


def _frozen(values: ArrayLike, dtype: type = np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _check_simplex_rows(rows: FloatArray, tol: float, what: str) -> None:
    if rows.shape[-1] < 2:
        raise DimensionTooSmall(
            f"{what} needs at least 2 classes, got {rows.shape[-1]}",
            m=int(rows.shape[-1]),
        )
    if not np.all(np.isfinite(rows)):
        raise InputValidationError(f"{what} has non-finite entries")
    negative = np.argwhere(rows < 0)
    if negative.size:
        raise NegativeEntry(
            f"{what} has a negative entry at {tuple(int(i) for i in negative[0])}",
            index=[int(i) for i in negative[0]],
            row=int(negative[0][0]) if rows.ndim == 2 else None,
        )
    deviation = np.abs(rows.sum(axis=-1) - 1.0)
    if np.any(deviation > tol):
        worst = int(np.argmax(deviation))
        raise SumOutOfTolerance(
            f"{what} sums to {float(rows.reshape(-1, rows.shape[-1])[worst].sum())!r}"
            f" (tolerance {tol:g})",
            row=worst,
        )


@dataclass(frozen=True, eq=False)
class ProbabilitySimplex:
    """A length-m nonnegative vector summing to one"""

    probs: FloatArray

    def __post_init__(self) -> None:
        probs = _frozen(self.probs)
        if probs.ndim != 1:
            raise InputValidationError("a simplex must be a 1-D vector")
        _check_simplex_rows(probs, SIMPLEX_TOL, "simplex")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, m: int) -> "ProbabilitySimplex":
        return cls(np.full(m, 1.0 / m))

    @property
    def m(self) -> int:
        return int(self.probs.shape[0])

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def tolist(self) -> list[float]:
        return [float(p) for p in self.probs]

    def __len__(self) -> int:
        return self.m

    def __array__(self, dtype: Optional[type] = None, copy: Optional[bool] = None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self) -> str:
        return f"ProbabilitySimplex({self.tolist()})"


SimplexLike = Union[ProbabilitySimplex, Sequence[float], FloatArray]


def validate_simplex(
    values: SimplexLike, tol: float = INGEST_TOL
) -> ProbabilitySimplex:
    """Validate a raw vector as a probability simplex.

    A sum within ``tol`` of one is silently renormalised; anything further
    off is rejected.
    """
    if isinstance(values, ProbabilitySimplex):
        return values
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1:
        raise InputValidationError("a simplex must be a 1-D vector")
    _check_simplex_rows(vector, tol, "simplex")
    return ProbabilitySimplex(vector / vector.sum())


@dataclass(frozen=True, eq=False)
class PosteriorMatrix:
    """N x m row-stochastic matrix of per-sample class posteriors"""

    rows: FloatArray

    def __post_init__(self) -> None:
        rows = _frozen(self.rows)
        if rows.ndim != 2:
            raise InputValidationError("posteriors must be a 2-D matrix")
        if rows.shape[0] < 1:
            raise EmptyBatch("posterior matrix has no rows")
        _check_simplex_rows(rows, SIMPLEX_TOL, "posterior row")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def m(self) -> int:
        return int(self.rows.shape[1])

    def top_probs(self) -> FloatArray:
        return self.rows.max(axis=1)

    def top_labels(self) -> IntArray:
        """Argmax per row; ties resolve to the lowest class index"""
        return np.argmax(self.rows, axis=1).astype(np.int64)

    def take(self, indices: ArrayLike) -> "PosteriorMatrix":
        return PosteriorMatrix(self.rows[np.asarray(indices, dtype=np.int64)])

    def __len__(self) -> int:
        return self.n


def validate_posteriors(rows: ArrayLike, tol: float = INGEST_TOL) -> PosteriorMatrix:
    """Validate raw rows, renormalising each row within ``tol`` of one"""
    if isinstance(rows, PosteriorMatrix):
        return rows
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim != 2:
        raise InputValidationError("posteriors must be a 2-D matrix")
    if matrix.shape[0] < 1:
        raise EmptyBatch("posterior matrix has no rows")
    _check_simplex_rows(matrix, tol, "posterior row")
    return PosteriorMatrix(matrix / matrix.sum(axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class LogitMatrix:
    """N x m raw classifier scores"""

    rows: FloatArray

    def __post_init__(self) -> None:
        rows = _frozen(self.rows)
        if rows.ndim != 2:
            raise InputValidationError("logits must be a 2-D matrix")
        if rows.shape[0] < 1:
            raise EmptyBatch("logit matrix has no rows")
        if rows.shape[1] < 2:
            raise DimensionTooSmall("logits need at least 2 classes", m=rows.shape[1])
        if not np.all(np.isfinite(rows)):
            bad = np.argwhere(~np.isfinite(rows))[0]
            raise NonFiniteLogits(
                f"non-finite logit at row {int(bad[0])}, column {int(bad[1])}",
                row=int(bad[0]),
                column=int(bad[1]),
            )
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def m(self) -> int:
        return int(self.rows.shape[1])

    def take(self, indices: ArrayLike) -> "LogitMatrix":
        return LogitMatrix(self.rows[np.asarray(indices, dtype=np.int64)])

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """m x m confusion matrix, entry (i, j) = p(predicted i | true j)"""

    entries: FloatArray
    kind: ConfusionKind = ConfusionKind.CONDITIONAL

    def __post_init__(self) -> None:
        entries = _frozen(self.entries)
        kind = ConfusionKind(self.kind)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatch("confusion matrix must be square")
        if entries.shape[0] < 2:
            raise DimensionTooSmall("confusion matrix needs at least 2 classes")
        if not np.all(np.isfinite(entries)) or np.any(entries < 0):
            raise NegativeEntry("confusion entries must be finite and nonnegative")
        if kind is ConfusionKind.CONDITIONAL:
            _check_simplex_rows(entries.T, SIMPLEX_TOL, "confusion column")
        elif abs(entries.sum() - 1.0) > SIMPLEX_TOL:
            raise SumOutOfTolerance(
                f"joint confusion sums to {float(entries.sum())!r}"
            )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", kind)

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    def recalls(self) -> FloatArray:
        """Per-class recall, the diagonal of the conditional matrix"""
        if self.kind is not ConfusionKind.CONDITIONAL:
            raise InputValidationError("recalls need a conditional confusion matrix")
        return np.diag(self.entries).copy()

    def to_joint(self, source: ProbabilitySimplex) -> "ConfusionMatrix":
        """Scale conditional columns by the source prior"""
        if self.kind is ConfusionKind.JOINT:
            return self
        if source.m != self.m:
            raise DimensionMismatch(
                f"source has {source.m} classes, confusion has {self.m}"
            )
        return ConfusionMatrix(
            self.entries * source.probs[None, :], kind=ConfusionKind.JOINT
        )


@dataclass(frozen=True, eq=False)
class ShiftWeights:
    """Class shift weights w = p_t(y) / p_s(y)"""

    w: FloatArray

    def __post_init__(self) -> None:
        w = _frozen(self.w)
        if w.ndim != 1:
            raise InputValidationError("weights must be a 1-D vector")
        if not np.all(np.isfinite(w)):
            raise InputValidationError("weights must be finite")
        if np.any(w < 0):
            raise NegativeEntry("weights must be nonnegative")
        object.__setattr__(self, "w", w)

    @property
    def m(self) -> int:
        return int(self.w.shape[0])

    def is_normalised_for(self, source: ProbabilitySimplex, tol: float = 1e-6) -> bool:
        return bool(abs(float(self.w @ source.probs) - 1.0) <= tol)

    def tolist(self) -> list[float]:
        return [float(v) for v in self.w]


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """Posteriors and/or logits with their true class labels"""

    labels: IntArray
    posteriors: Optional[PosteriorMatrix] = None
    logits: Optional[LogitMatrix] = None

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise InputValidationError("labels must be a 1-D vector")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise InputValidationError("labels must be integer class indices")
        labels = _frozen(labels, dtype=np.int64)
        if self.posteriors is None and self.logits is None:
            raise InputValidationError("a labeled batch needs posteriors or logits")
        shapes = [
            (matrix.n, matrix.m)
            for matrix in (self.posteriors, self.logits)
            if matrix is not None
        ]
        n, m = shapes[0]
        if any(shape != (n, m) for shape in shapes):
            raise DimensionMismatch("posteriors and logits disagree in shape")
        if labels.shape[0] != n:
            raise DimensionMismatch(
                f"{labels.shape[0]} labels for {n} rows",
                labels=int(labels.shape[0]),
                rows=n,
            )
        if labels.size and (labels.min() < 0 or labels.max() >= m):
            raise InputValidationError(
                f"labels must lie in [0, {m})", m=m, max=int(labels.max())
            )
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def m(self) -> int:
        matrix = self.posteriors if self.posteriors is not None else self.logits
        assert matrix is not None
        return matrix.m

    def require_posteriors(self) -> PosteriorMatrix:
        if self.posteriors is None:
            raise InputValidationError("this operation needs posteriors, not logits")
        return self.posteriors

    def require_logits(self) -> LogitMatrix:
        if self.logits is None:
            raise InputValidationError("this operation needs logits")
        return self.logits

    def class_counts(self) -> IntArray:
        return np.bincount(self.labels, minlength=self.m).astype(np.int64)

    def take(self, indices: ArrayLike) -> "LabeledBatch":
        idx = np.asarray(indices, dtype=np.int64)
        posteriors, logits = self.posteriors, self.logits
        return LabeledBatch(
            labels=self.labels[idx],
            posteriors=posteriors.take(idx) if posteriors is not None else None,
            logits=logits.take(idx) if logits is not None else None,
        )

    def with_posteriors(self, posteriors: PosteriorMatrix) -> "LabeledBatch":
        return LabeledBatch(
            labels=self.labels, posteriors=posteriors, logits=self.logits
        )
