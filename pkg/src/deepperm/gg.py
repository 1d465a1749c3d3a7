"""Determinant-based unbiased permanent estimators (Godsil-Gutman type).

Each entry ``a_ij`` is replaced by ``sqrt(a_ij) * x_ij`` with ``x_ij`` an
independent random unit:

* ``REAL``: uniform sign, statistic ``det^2``.
* ``COMPLEX``: uniform fourth root of unity, statistic ``|det|^2``.
* ``QUATERNION``: uniform element of ``{+-1, +-i, +-j, +-k}``; the
  quaternion matrix is embedded as a ``2n x 2n`` complex matrix and the
  statistic is the (real, nonnegative) determinant of the embedding.

All three have expectation ``per A``.  Their critical ratios
``E[X^2] / E[X]^2`` are at most ``c^(n/2)`` with ``c = 3, 2, 3/2``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .matrix import as_matrix

SAMPLE_CAP = 10**8
CHUNK_ENTRIES = 1 << 20


class GGVariant(str, Enum):
    REAL = "real"
    COMPLEX = "complex"
    QUATERNION = "quaternion"

    @classmethod
    def parse(cls, value) -> GGVariant:
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"r": cls.REAL, "real": cls.REAL, "c": cls.COMPLEX, "complex": cls.COMPLEX,
                   "q": cls.QUATERNION, "quaternion": cls.QUATERNION}
        if key not in aliases:
            raise ValueError(f"unknown Godsil-Gutman variant {value!r}")
        return aliases[key]

    @property
    def critical_ratio_base(self) -> float:
        return {"real": 3.0, "complex": 2.0, "quaternion": 1.5}[self.value]

    def critical_ratio_bound(self, n: int) -> float:
        return self.critical_ratio_base ** (n / 2)


def determinant(x: np.ndarray) -> np.ndarray:
    """Determinant(s) by LU factorization with partial pivoting (LAPACK getrf).

    Works on a single matrix or a stack ``(..., n, n)``.
    """
    return np.linalg.det(x)


_UNITS4 = np.array([1, 1j, -1, -1j])


def _quaternion_embedding(w, x, y, z):
    """2n x 2n complex matrix of ``w + x i + y j + z k`` (each n x n)."""
    top = np.concatenate([w + 1j * x, y + 1j * z], axis=-1)
    bottom = np.concatenate([-y + 1j * z, w - 1j * x], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def gg_samples(m, variant, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent single-draw estimates."""
    a = as_matrix(m, square=True)
    variant = GGVariant.parse(variant)
    n = a.shape[0]
    root = np.sqrt(a)
    out = np.empty(size)
    per_sample = n * n * (4 if variant is GGVariant.QUATERNION else 1)
    chunk = max(1, CHUNK_ENTRIES // per_sample)
    for lo in range(0, size, chunk):
        c = min(chunk, size - lo)
        if variant is GGVariant.REAL:
            signs = rng.integers(0, 2, size=(c, n, n)) * 2.0 - 1.0
            out[lo:lo + c] = determinant(root * signs) ** 2
        elif variant is GGVariant.COMPLEX:
            units = _UNITS4[rng.integers(0, 4, size=(c, n, n))]
            out[lo:lo + c] = np.abs(determinant(root * units)) ** 2
        else:
            # axis 0..3 of the unit, sign +-1
            axis = rng.integers(0, 4, size=(c, n, n))
            sign = rng.integers(0, 2, size=(c, n, n)) * 2.0 - 1.0
            parts = [np.where(axis == t, sign * root, 0.0) for t in range(4)]
            det = determinant(_quaternion_embedding(*parts))
            out[lo:lo + c] = np.maximum(det.real, 0.0)
    return out


def gg_single_estimate(m, variant, rng: np.random.Generator) -> float:
    return float(gg_samples(m, variant, 1, rng)[0])


@dataclass(frozen=True)
class GGReport:
    estimate: float
    variant: GGVariant
    epsilon: float
    delta: float
    batches: int
    batch_size: int
    total_samples: int
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "variant": self.variant.value,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "batches": self.batches,
            "batch_size": self.batch_size,
            "total_samples": self.total_samples,
            "wall_time": self.wall_time,
        }


def mom_plan(n: int, variant, eps: float, delta: float) -> tuple:
    """``(batches, batch_size)`` for the median-of-means wrapper.

    Chebyshev makes a batch mean of ``4 c^(n/2) / eps^2`` samples miss by
    more than ``eps`` with probability at most 1/4; Hoeffding then makes the
    median of ``8 ln(2/delta)`` batches miss with probability below delta.
    """
    variant = GGVariant.parse(variant)
    if not eps > 0 or not 0 < delta < 1:
        raise ValueError("need eps > 0 and delta in (0, 1)")
    batches = math.ceil(8.0 * math.log(2.0 / delta))
    size = math.ceil(4.0 * variant.critical_ratio_bound(n) / eps**2)
    return batches, size


def gg_estimate(m, variant, eps: float, delta: float, rng: np.random.Generator,
                sample_cap: int = SAMPLE_CAP, time_limit: Optional[float] = None) -> GGReport:
    a = as_matrix(m, square=True)
    variant = GGVariant.parse(variant)
    start = time.perf_counter()
    batches, size = mom_plan(a.shape[0], variant, eps, delta)
    if batches * size > sample_cap:
        raise ValueError(f"{batches * size} samples needed, above the cap of {sample_cap}")
    means = np.empty(batches)
    for b in range(batches):
        means[b] = gg_samples(a, variant, size, rng).mean()
        if time_limit is not None and time.perf_counter() - start > time_limit:
            raise TimeoutError(f"time limit hit after {b + 1} of {batches} batches")
    return GGReport(float(np.median(means)), variant, eps, delta, batches, size,
                    batches * size, time.perf_counter() - start)
