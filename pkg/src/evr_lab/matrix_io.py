"""Correlation-matrix loading, validation and factorization.

The shipped fixtures are the ten-variable correlation matrices used in the
seemingly-unrelated-regressions example, stored at two decimals under
``data/appendix_c/<tag>/sigma_{x,y}.csv``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

__all__ = [
    "APPENDIX_C_INTERVALS",
    "APPENDIX_C_TAGS",
    "AsymmetricMatrixError",
    "CorrelationMatrix",
    "DiagonalError",
    "EntryRangeError",
    "IndefiniteMatrixError",
    "MatrixParseError",
    "MatrixShapeError",
    "MatrixValidationError",
    "dump_matrix",
    "dump_matrix_json",
    "factorize",
    "interval_membership",
    "load_appendix_c",
    "load_matrix",
    "load_matrix_json",
]

SYMMETRY_TOL = 1e-12
DIAGONAL_TOL = 1e-12
ENTRY_TOL = 1e-12
PSD_TOL = -1e-8
CLIP_EIGENVALUE = 1e-10

APPENDIX_C_TAGS = ("full", "pm33_100", "pm67_100", "pm33_67", "pos33_67", "pos67_100")

# Interval unions the fixtures were sampled from (off-diagonal entries).
APPENDIX_C_INTERVALS = {
    "full": [(-1.0, 1.0)],
    "pm33_100": [(-1.0, -1 / 3), (1 / 3, 1.0)],
    "pm67_100": [(-1.0, -2 / 3), (2 / 3, 1.0)],
    "pm33_67": [(-2 / 3, -1 / 3), (1 / 3, 2 / 3)],
    "pos33_67": [(1 / 3, 2 / 3)],
    "pos67_100": [(2 / 3, 1.0)],
}


class MatrixValidationError(ValueError):
    """Base class for rejected correlation matrices."""


class MatrixParseError(MatrixValidationError):
    pass


class MatrixShapeError(MatrixValidationError):
    pass


class AsymmetricMatrixError(MatrixValidationError):
    pass


class DiagonalError(MatrixValidationError):
    pass


class EntryRangeError(MatrixValidationError):
    pass


class IndefiniteMatrixError(MatrixValidationError):
    pass


@dataclass(frozen=True)
class CorrelationMatrix:
    """Validated symmetric PSD matrix with unit diagonal.

    Build with :meth:`from_array` (or the loaders); the constructor trusts its
    inputs.
    """

    entries: np.ndarray
    min_eigenvalue: float
    mean_abs_offdiag: float

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, values) -> "CorrelationMatrix":
        try:
            a = np.array(values, dtype=float)
        except (TypeError, ValueError) as exc:
            raise MatrixParseError(f"non-numeric matrix entries: {exc}") from None
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise MatrixShapeError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise MatrixParseError("matrix contains non-finite entries")
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
            raise AsymmetricMatrixError("matrix is not symmetric")
        if np.max(np.abs(np.diag(a) - 1.0)) > DIAGONAL_TOL:
            raise DiagonalError("diagonal entries must equal 1")
        if np.max(np.abs(a)) > 1.0 + ENTRY_TOL:
            raise EntryRangeError("entries must lie in [-1, 1]")
        lam = float(np.linalg.eigvalsh(a)[0])
        if lam < PSD_TOL:
            raise IndefiniteMatrixError(f"matrix is indefinite (min eigenvalue {lam:.3g})")
        a.setflags(write=False)
        c = a.shape[0]
        off = np.abs(a[~np.eye(c, dtype=bool)])
        mean_abs = float(off.mean()) if off.size else 0.0
        return cls(a, lam, mean_abs)

    @classmethod
    def identity(cls, dim: int) -> "CorrelationMatrix":
        return cls.from_array(np.eye(dim))

    @classmethod
    def equicorrelated(cls, dim: int, rho: float) -> "CorrelationMatrix":
        a = np.full((dim, dim), float(rho))
        np.fill_diagonal(a, 1.0)
        return cls.from_array(a)

    def offdiag(self) -> np.ndarray:
        """Strict upper-triangle entries, row-major."""
        iu = np.triu_indices(self.dim, k=1)
        return self.entries[iu]

    @cached_property
    def cholesky(self) -> np.ndarray:
        return factorize(self)


def _as_matrix(m) -> CorrelationMatrix:
    return m if isinstance(m, CorrelationMatrix) else CorrelationMatrix.from_array(m)


def load_matrix(source: str | Path | TextIO) -> CorrelationMatrix:
    """Read a header-less comma-separated matrix and validate it.

    ``source`` may be a path or an open text stream.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return load_matrix(fh)
    rows = []
    for line_no, row in enumerate(csv.reader(source), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            rows.append([float(cell) for cell in row])
        except ValueError:
            raise MatrixParseError(f"non-numeric value on line {line_no}") from None
    if not rows:
        raise MatrixShapeError("empty matrix")
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() != len(rows):
        raise MatrixShapeError("matrix is not square")
    return CorrelationMatrix.from_array(rows)


def dump_matrix(m, stream: TextIO | None = None) -> str:
    """Write ``m`` as CSV using shortest round-trip float formatting."""
    entries = _as_matrix(m).entries if not isinstance(m, np.ndarray) else m
    text = "\n".join(",".join(repr(float(v)) for v in row) for row in entries) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def load_matrix_json(source: str | Path | TextIO) -> CorrelationMatrix:
    """Read ``{"dim": d, "entries_row_major": [...]}``."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            return load_matrix_json(fh)
    record = json.load(source)
    try:
        dim = int(record["dim"])
        flat = record["entries_row_major"]
    except (KeyError, TypeError, ValueError):
        raise MatrixParseError("JSON matrix needs 'dim' and 'entries_row_major'") from None
    if len(flat) != dim * dim:
        raise MatrixShapeError(f"expected {dim * dim} entries, got {len(flat)}")
    return CorrelationMatrix.from_array(np.asarray(flat, dtype=float).reshape(dim, dim))


def dump_matrix_json(m) -> str:
    m = _as_matrix(m)
    return json.dumps({"dim": m.dim, "entries_row_major": m.entries.ravel().tolist()})


def load_appendix_c(tag: str) -> tuple[CorrelationMatrix, CorrelationMatrix]:
    """Return the shipped ``(sigma_x, sigma_y)`` fixture pair for ``tag``."""
    if tag not in APPENDIX_C_TAGS:
        raise KeyError(f"unknown fixture tag {tag!r}; choose from {APPENDIX_C_TAGS}")
    base = resources.files("evr_lab") / "data" / "appendix_c" / tag
    out = []
    for name in ("sigma_x.csv", "sigma_y.csv"):
        out.append(load_matrix(io.StringIO(base.joinpath(name).read_text())))
    return out[0], out[1]


def interval_membership(
    m, intervals: Sequence[tuple[float, float]], tol: float = 5e-3
) -> tuple[bool, list[tuple[int, int, float]]]:
    """Check every off-diagonal entry against a union of closed intervals.

    Returns ``(ok, violations)`` where violations are ``(i, j, value)`` with
    ``i < j``.  Endpoints are widened by ``tol`` to absorb published rounding.
    """
    if not intervals:
        raise ValueError("interval specification is empty")
    bounds = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if lo > hi:
            lo, hi = hi, lo
        bounds.append((lo, hi))
    a = _as_matrix(m).entries
    violations = []
    for i, j in zip(*np.triu_indices(a.shape[0], k=1)):
        v = float(a[i, j])
        if not any(lo - tol <= v <= hi + tol for lo, hi in bounds):
            violations.append((int(i), int(j), v))
    return not violations, violations


def factorize(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the matrix.

    Near-singular matrices get their eigenvalues clipped at 1e-10 before the
    Cholesky step.
    """
    m = _as_matrix(m)
    a = m.entries
    if m.min_eigenvalue < PSD_TOL:
        raise IndefiniteMatrixError(f"matrix is indefinite (min eigenvalue {m.min_eigenvalue:.3g})")
    if m.min_eigenvalue < CLIP_EIGENVALUE:
        lam, vec = np.linalg.eigh(a)
        a = (vec * np.maximum(lam, CLIP_EIGENVALUE)) @ vec.T
        a = 0.5 * (a + a.T)
    return np.linalg.cholesky(a)
