"""
File I/O for matrices, labels, settings documents and run manifests

Matrix files are CSV: one row per sample, m numeric columns, optionally a
single header row of class names. Floats are written with ``repr`` so they
read back bit-identical.
"""

import csv
import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field

from ..core.errors import InputValidationError, MatrixFileError
from ..core.types import (
    INGEST_TOL,
    IntArray,
    LogitMatrix,
    PosteriorMatrix,
    ProbabilitySimplex,
    validate_posteriors,
    validate_simplex,
)

PathLike = Union[str, Path]


def _parse_float(cell: str) -> Optional[float]:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value


def read_matrix(path: PathLike) -> Tuple[np.ndarray, Optional[List[str]], int]:
    """Parse a numeric CSV.

    Returns the matrix, the header names if the first row was a header, and
    the file line number of the first data row.
    """
    path = Path(path)
    if not path.exists():
        raise MatrixFileError("file not found", str(path))
    header: Optional[List[str]] = None
    rows: List[List[float]] = []
    first_data_line = 1
    width: Optional[int] = None
    with open(path, newline="") as f:
        for line_no, record in enumerate(csv.reader(f), start=1):
            cells = [c.strip() for c in record]
            if not cells or all(c == "" for c in cells):
                continue
            values = [_parse_float(c) for c in cells]
            if any(v is None for v in values):
                if header is None and not rows:
                    header = cells
                    width = len(cells)
                    first_data_line = line_no + 1
                    continue
                bad = cells[values.index(None)]
                raise MatrixFileError(f"non-numeric cell {bad!r}", str(path), line_no)
            if any(not math.isfinite(v) for v in values):  # type: ignore[arg-type]
                raise MatrixFileError("non-finite value", str(path), line_no)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise MatrixFileError(
                    f"expected {width} columns, found {len(values)}",
                    str(path),
                    line_no,
                )
            if not rows:
                first_data_line = line_no
            rows.append(values)  # type: ignore[arg-type]
    if not rows:
        raise MatrixFileError("no data rows", str(path))
    return np.asarray(rows, dtype=np.float64), header, first_data_line


def _with_line(
    error: InputValidationError, path: Path, first_line: int
) -> MatrixFileError:
    row = error.details.get("row")
    line = first_line + row if isinstance(row, int) else None
    return MatrixFileError(error.message, str(path), line)


def read_posteriors(path: PathLike, tol: float = INGEST_TOL) -> PosteriorMatrix:
    path = Path(path)
    matrix, _, first_line = read_matrix(path)
    try:
        return validate_posteriors(matrix, tol)
    except MatrixFileError:
        raise
    except InputValidationError as e:
        raise _with_line(e, path, first_line) from e


def read_logits(path: PathLike) -> LogitMatrix:
    path = Path(path)
    matrix, _, first_line = read_matrix(path)
    try:
        return LogitMatrix(matrix)
    except InputValidationError as e:
        raise _with_line(e, path, first_line) from e


def read_simplex(path: PathLike, tol: float = INGEST_TOL) -> ProbabilitySimplex:
    """A prior stored as a single row (or a single column)"""
    path = Path(path)
    matrix, _, first_line = read_matrix(path)
    if matrix.shape[0] != 1 and matrix.shape[1] != 1:
        raise MatrixFileError(
            "a prior file must hold one row or one column", str(path), first_line
        )
    try:
        return validate_simplex(matrix.reshape(-1), tol)
    except InputValidationError as e:
        raise MatrixFileError(e.message, str(path), first_line) from e


def read_labels(
    path: PathLike, class_names: Optional[Sequence[str]] = None
) -> IntArray:
    """One label per line, as a class index or a class name"""
    path = Path(path)
    if not path.exists():
        raise MatrixFileError("file not found", str(path))
    lookup = {name: i for i, name in enumerate(class_names or [])}
    labels: List[int] = []
    with open(path, newline="") as f:
        for line_no, record in enumerate(csv.reader(f), start=1):
            cells = [c.strip() for c in record if c.strip() != ""]
            if not cells:
                continue
            if len(cells) != 1:
                raise MatrixFileError(
                    "expected one label per line", str(path), line_no
                )
            cell = cells[0]
            if cell in lookup:
                labels.append(lookup[cell])
                continue
            try:
                labels.append(int(cell))
            except ValueError:
                if not labels and line_no == 1:
                    continue  # header
                raise MatrixFileError(
                    f"unknown label {cell!r}", str(path), line_no
                ) from None
            if labels[-1] < 0:
                raise MatrixFileError("negative label", str(path), line_no)
    if not labels:
        raise MatrixFileError("no labels", str(path))
    return np.asarray(labels, dtype=np.int64)


def write_matrix(
    target: Union[PathLike, TextIO],
    rows: np.ndarray,
    header: Optional[Sequence[str]] = None,
) -> None:
    """Write a matrix with shortest round-trip float formatting"""

    def _write(f: TextIO) -> None:
        writer = csv.writer(f, lineterminator="\n")
        if header is not None:
            writer.writerow(list(header))
        for row in np.atleast_2d(rows):
            writer.writerow([repr(float(v)) for v in row])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as f:
            _write(f)
    else:
        _write(target)


def write_labels(path: PathLike, labels: np.ndarray) -> None:
    with open(path, "w") as f:
        for label in labels:
            f.write(f"{int(label)}\n")


def load_document(path: PathLike) -> Dict[str, Any]:
    """Load a YAML or JSON mapping"""
    path = Path(path)
    if not path.exists():
        raise InputValidationError(f"file not found: {path}", path=str(path))
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise InputValidationError(f"{path}: cannot parse: {e}", path=str(path)) from e
    if not isinstance(data, dict):
        raise InputValidationError(f"{path}: expected a mapping", path=str(path))
    return data


def file_digest(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


class RunManifest(BaseModel):
    """What a command ran with, enough to replay it"""

    command: str = Field(description="CLI command name")
    config: Dict[str, Any] = Field(default_factory=dict)
    seeds: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(
        default_factory=dict, description="Input path -> sha256 digest"
    )
    version: str
    created_at: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    @classmethod
    def for_inputs(
        cls,
        command: str,
        version: str,
        inputs: Sequence[Optional[PathLike]] = (),
        **fields: Any,
    ) -> "RunManifest":
        digests = {str(p): file_digest(p) for p in inputs if p is not None}
        return cls(command=command, version=version, inputs=digests, **fields)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path


def manifest_path_for(output: PathLike) -> Path:
    """``manifest.json`` inside a directory, else ``<output>.manifest.json``"""
    output = Path(output)
    if output.is_dir():
        return output / "manifest.json"
    return output.with_name(output.name + ".manifest.json")
