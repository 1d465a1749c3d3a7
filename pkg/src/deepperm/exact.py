"""Exact permanents and the rectangular-permanent table behind deep bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    MatrixTooLargeError,
    MemoryBudgetError,
    NumericOverflowError,
    ZeroPermanentError,
)
from .logscale import LogScale
from .matrix import as_matrix

EXACT_MAX_N = 30
BRUTEFORCE_MAX_N = 10
DEPTH_CAP = 28
MEMORY_BUDGET = 2 * 1024**3


def permanent_bruteforce(m) -> float:
    """Sum of ``prod_i a[i, sigma(i)]`` over all n! permutations."""
    a = as_matrix(m, square=True)
    n = a.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise MatrixTooLargeError(f"brute force is limited to n <= {BRUTEFORCE_MAX_N}")
    rows = range(n)
    return float(sum(math.prod(a[i, s[i]] for i in rows) for s in itertools.permutations(rows)))


def permanent_exact(m, max_n: int = EXACT_MAX_N) -> float:
    """Permanent by Glynn's formula with Gray-code ordering, O(2^n n).

    Returns ``inf`` when the value is not representable; use
    :func:`log_permanent_exact` for large magnitudes.
    """
    return log_permanent_exact(m, max_n).value


def log_permanent_exact(m, max_n: int = EXACT_MAX_N) -> LogScale:
    a = as_matrix(m, square=True)
    n = a.shape[0]
    if n > max_n:
        raise MatrixTooLargeError(f"exact permanent is limited to n <= {max_n}, got {n}")
    scale = a.max(axis=1)
    if np.any(scale == 0):
        return LogScale.zero()
    p = _kernels.glynn_permanent(np.ascontiguousarray(a / scale[:, None]))
    if p <= 0:
        # cancellation can leave a tiny negative residue when per == 0
        return LogScale.zero()
    return LogScale(float(np.log(scale).sum() + math.log(p)))


@dataclass(frozen=True)
class DeepTable:
    """All slices ``g[i, K]`` of the rectangular-permanent recurrence.

    ``g[i, K]`` is the weighted permanent of rows ``0..i-1`` against the
    column subset ``K`` (bitmask over the ``d`` columns of ``b``), where a
    row left unmatched contributes ``skip[i]``.  With ``skip == 1`` this is
    the plain rectangular permanent, and ``g[n, full]`` equals
    ``per b``.
    """

    b: np.ndarray
    skip: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    @property
    def columns(self) -> tuple:
        return tuple(range(self.d))

    @property
    def value(self) -> float:
        return float(self.g[self.n, (1 << self.d) - 1])


def table_bytes(n: int, d: int) -> int:
    return (n + 1) * (1 << d) * 8


def rper(b, skip=None, *, depth_cap: int = DEPTH_CAP, memory_budget: int = MEMORY_BUDGET) -> DeepTable:
    """Fill the table ``g_i(K)`` row by row in O(2^d d n) operations.

    ``g_i(K) = skip_i g_{i-1}(K) + sum_{j in K} b_ij g_{i-1}(K - {j})``.
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError("b must be a 2-D array")
    n, d = b.shape
    if d > n:
        raise ValueError(f"need d <= n, got d={d}, n={n}")
    if d > depth_cap:
        raise ValueError(f"depth {d} exceeds the configured cap {depth_cap}")
    need = table_bytes(n, d)
    if need > memory_budget:
        raise MemoryBudgetError(need, memory_budget)
    skip = np.ones(n) if skip is None else np.ascontiguousarray(skip, dtype=np.float64)

    g = np.zeros((n + 1, 1 << d))
    g[0, 0] = 1.0
    for i in range(1, n + 1):
        prev, cur = g[i - 1], g[i]
        np.multiply(prev, skip[i - 1], out=cur)
        for j in range(d):
            bij = b[i - 1, j]
            if bij == 0.0:
                continue
            # K with bit j set, paired with K without it
            pv = prev.reshape(-1, 2, 1 << j)
            cv = cur.reshape(-1, 2, 1 << j)
            cv[:, 1, :] += bij * pv[:, 0, :]
    if not np.isfinite(g[n, -1]):
        raise NumericOverflowError("rectangular permanent overflowed; rescale the rows")
    g.flags.writeable = False
    return DeepTable(b=b, skip=skip, g=g)


def dsample_injection(table: DeepTable, rng: np.random.Generator) -> np.ndarray:
    """Draw an injection with probability proportional to its weight.

    Returns ``tau`` with ``tau[j]`` the row matched to column ``j``.
    """
    tau = np.empty(max(table.d, 1), dtype=np.int64)
    u = rng.random(table.n)
    if _kernels.dsample(table.g, table.b, table.skip, u, tau) < 0:
        raise ZeroPermanentError("the rectangular permanent is zero")
    return tau[: table.d]


def dsample(table: DeepTable, rng: np.random.Generator) -> tuple:
    """Draw the row set ``I = tau(J)`` with probability ``per B_IJ / per B``."""
    return tuple(sorted(int(i) for i in dsample_injection(table, rng)))
