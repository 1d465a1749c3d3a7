"""Dense nonnegative matrices: validation, file I/O and instance generators.

Matrices are plain ``float64`` numpy arrays marked read-only.  Random
instances use numpy's PCG64 generator (``numpy.random.default_rng(seed)``),
so every instance is a pure function of its :class:`InstanceSpec`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse

from .errors import MatrixParseError, NegativeEntryError, NotSquareError

BLOCK_SIZE = 5


def as_matrix(a, *, square: bool = False) -> np.ndarray:
    """Validate ``a`` and return it as a read-only 2-D float64 array."""
    m = np.array(a, dtype=np.float64, copy=True)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise MatrixParseError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixParseError("matrix has non-finite entries")
    if np.any(m < 0):
        raise NegativeEntryError("matrix has negative entries")
    if square and m.shape[0] != m.shape[1]:
        raise NotSquareError(f"expected a square matrix, got shape {m.shape}")
    m.flags.writeable = False
    return m


def require_square(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquareError(f"expected a square matrix, got shape {m.shape}")


def _guess_format(path: str) -> str:
    return "matrix-market" if str(path).lower().endswith((".mtx", ".mm")) else "dense-text"


def load_matrix(path, format: Optional[str] = None) -> np.ndarray:
    """Read a matrix from a MatrixMarket file or the dense-text format.

    Dense text is a header line ``"n_rows n_cols"`` followed by the entries,
    whitespace separated, row by row.  MatrixMarket pattern files map stored
    positions to 1.0.  Sparse inputs are densified.
    """
    format = format or _guess_format(path)
    if format == "matrix-market":
        try:
            raw = scipy.io.mmread(str(path))
        except (ValueError, OSError, IndexError) as exc:
            if isinstance(exc, FileNotFoundError):
                raise
            raise MatrixParseError(f"cannot parse MatrixMarket file {path}: {exc}") from exc
        if scipy.sparse.issparse(raw):
            raw = raw.toarray()
        return as_matrix(np.asarray(raw, dtype=np.float64))
    if format != "dense-text":
        raise ValueError(f"unknown matrix format {format!r}")

    with open(path) as fh:
        tokens = fh.read().split()
    try:
        n_rows, n_cols = int(tokens[0]), int(tokens[1])
        values = [float(t) for t in tokens[2:]]
    except (IndexError, ValueError) as exc:
        raise MatrixParseError(f"cannot parse dense-text file {path}") from exc
    if n_rows < 1 or n_cols < 1 or len(values) != n_rows * n_cols:
        raise MatrixParseError(
            f"{path}: header says {n_rows}x{n_cols}, found {len(values)} entries"
        )
    return as_matrix(np.array(values).reshape(n_rows, n_cols))


def save_matrix(m: np.ndarray, path, format: Optional[str] = None) -> None:
    """Write ``m`` so that :func:`load_matrix` reads back identical doubles."""
    m = as_matrix(m)
    format = format or _guess_format(path)
    if format == "matrix-market":
        scipy.io.mmwrite(str(path), np.asarray(m), precision=17)
        return
    if format != "dense-text":
        raise ValueError(f"unknown matrix format {format!r}")
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    # repr() of a float is the shortest string that round-trips
    lines += [" ".join(repr(float(x)) for x in row) for row in m]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class InstanceClass(str, Enum):
    UNIFORM = "Uniform"
    BLOCK_DIAGONAL = "BlockDiagonal"
    BERNOULLI = "Bernoulli"
    STAIRCASE = "Staircase"
    FILE = "File"


@dataclass(frozen=True)
class InstanceSpec:
    cls: InstanceClass
    n: int = 0
    p: Optional[float] = None
    seed: int = 0
    path: Optional[str] = None
    block: int = BLOCK_SIZE

    def __post_init__(self):
        object.__setattr__(self, "cls", InstanceClass(self.cls))
        if (self.p is not None) != (self.cls is InstanceClass.BERNOULLI):
            raise ValueError("p must be given exactly for Bernoulli instances")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if (self.path is not None) != (self.cls is InstanceClass.FILE):
            raise ValueError("path must be given exactly for File instances")
        if self.cls is not InstanceClass.FILE and self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.block != BLOCK_SIZE:
            raise ValueError("BlockDiagonal block size is fixed at 5")

    @property
    def instance_id(self) -> str:
        if self.cls is InstanceClass.FILE:
            return os.path.splitext(os.path.basename(self.path))[0]
        if self.cls is InstanceClass.STAIRCASE:
            return f"Staircase-{self.n}"
        if self.cls is InstanceClass.BERNOULLI:
            return f"Bernoulli({self.p:g})-{self.n}-s{self.seed}"
        return f"{self.cls.value}-{self.n}-s{self.seed}"


def staircase(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return as_matrix((i[:, None] + i[None, :] <= n + 2).astype(np.float64))


def generate(spec: InstanceSpec) -> np.ndarray:
    """Build the matrix described by ``spec`` (deterministic in the seed)."""
    n = spec.n
    if spec.cls is InstanceClass.FILE:
        return load_matrix(spec.path)
    if spec.cls is InstanceClass.STAIRCASE:
        return staircase(n)
    rng = np.random.default_rng(spec.seed)
    if spec.cls is InstanceClass.UNIFORM:
        return as_matrix(rng.random((n, n)))
    if spec.cls is InstanceClass.BERNOULLI:
        return as_matrix((rng.random((n, n)) < spec.p).astype(np.float64))
    # BlockDiagonal: the last block is truncated to n mod 5 when nonzero
    m = np.zeros((n, n))
    for start in range(0, n, spec.block):
        stop = min(start + spec.block, n)
        m[start:stop, start:stop] = rng.random((stop - start, stop - start))
    return as_matrix(m)
