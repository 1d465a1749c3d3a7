"""Row-factorizable permanent upper bounds and their depth-d refinements.

Three bounds are provided, each a product of one factor per row:

* Minc-Bregman: ``gamma(|A_i|)`` with ``gamma(k) = (k!)^(1/k)``.
* Schrijver-Soules: ``sum_k a*_ik (gamma(k) - gamma(k-1))`` over the row
  sorted into nonincreasing order.
* Huber-Law: ``h(|A_i|) / e``.

A row without positive entries always gets factor 0.

Minc-Bregman is a theorem for 0/1 matrices only.  For real rows it is
evaluated with ``|A_i|`` the row sum and ``gamma`` extended through the
Gamma function, which is no longer guaranteed to bound the permanent
(``[[2]]`` gives ``sqrt(2)``).  Schrijver-Soules is its sound real-valued
counterpart.

The Huber-Law bound is only valid for entries in [0, 1].  Rows whose
largest entry exceeds one are divided by that entry first and the factor
is carried as a row scale, so ``bound(A, HUBER_LAW)`` is an upper bound
for every nonnegative matrix and agrees with the plain formula whenever
all entries are at most one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import NotSquareError
from .exact import DEPTH_CAP, MEMORY_BUDGET, DeepTable, rper
from .logscale import LogScale
from .matrix import as_matrix

NEST_TOL = 1e-12


class BoundKind(str, Enum):
    MINC_BREGMAN = "mb"
    SCHRIJVER_SOULES = "ss"
    HUBER_LAW = "hl"

    @classmethod
    def parse(cls, value) -> BoundKind:
        if isinstance(value, cls):
            return value
        aliases = {
            "mb": cls.MINC_BREGMAN, "mincbregman": cls.MINC_BREGMAN,
            "ss": cls.SCHRIJVER_SOULES, "schrijversoules": cls.SCHRIJVER_SOULES,
            "hl": cls.HUBER_LAW, "huberlaw": cls.HUBER_LAW,
        }
        key = str(value).lower().replace("-", "").replace("_", "")
        if key not in aliases:
            raise ValueError(f"unknown bound kind {value!r}")
        return aliases[key]


def gamma_minc(k: float) -> float:
    """``(k!)^(1/k)``, with ``gamma(0) = 0``.  Accepts real ``k`` via lgamma."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 0.0
    return math.exp(math.lgamma(k + 1.0) / k)


def h(r: float) -> float:
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r >= 1.0:
        return r + 0.5 * math.log(r) + math.e - 1.0
    return 1.0 + (math.e - 1.0) * r


def ss_deltas(n: int) -> np.ndarray:
    """``delta[k] = gamma(k) - gamma(k-1)`` for ``k = 1..n``; slot 0 is unused."""
    gam = np.array([gamma_minc(k) for k in range(n + 1)])
    delta = np.zeros(n + 1)
    delta[1:] = np.diff(gam)
    return delta


def _gamma_vec(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(gammaln(r[pos] + 1.0) / r[pos])
    return out


def _h_vec(r: np.ndarray) -> np.ndarray:
    big = r >= 1.0
    out = 1.0 + (math.e - 1.0) * r
    out[big] = r[big] + 0.5 * np.log(r[big]) + math.e - 1.0
    return out


def hl_row_scale(a: np.ndarray) -> np.ndarray:
    """Per-row divisor bringing every entry into [0, 1] (1 for rows already there)."""
    if a.shape[1] == 0:
        return np.ones(a.shape[0])
    return np.maximum(1.0, a.max(axis=1))


def row_factors(a: np.ndarray, kind: BoundKind) -> np.ndarray:
    """Factor of each row of ``a`` (rectangular allowed).

    For Huber-Law, ``a`` is assumed to be already scaled into [0, 1].
    """
    kind = BoundKind.parse(kind)
    a = np.asarray(a, dtype=np.float64)
    nonzero = (a > 0).any(axis=1)
    if kind is BoundKind.SCHRIJVER_SOULES:
        srt = -np.sort(-a, axis=1)
        f = srt @ ss_deltas(a.shape[1])[1:]
    else:
        r = a.sum(axis=1)
        f = _gamma_vec(r) if kind is BoundKind.MINC_BREGMAN else _h_vec(r) / math.e
    return np.where(nonzero, f, 0.0)


def _log_product(f: np.ndarray) -> LogScale:
    if np.any(f <= 0):
        return LogScale.zero()
    return LogScale(float(np.log(f).sum()))


def bound(m, kind) -> LogScale:
    """Upper bound U(A) as a product of row factors; 1 for the empty matrix."""
    kind = BoundKind.parse(kind)
    a = np.asarray(m, dtype=np.float64)
    if a.size == 0:
        return LogScale.one()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquareError(f"expected a square matrix, got shape {a.shape}")
    if kind is BoundKind.HUBER_LAW:
        s = hl_row_scale(a)
        return LogScale(float(np.log(s).sum())) * _log_product(row_factors(a / s[:, None], kind))
    return _log_product(row_factors(a, kind))


def _minor(a: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    keep_r = np.setdiff1d(np.arange(a.shape[0]), rows)
    keep_c = np.setdiff1d(np.arange(a.shape[1]), cols)
    return a[np.ix_(keep_r, keep_c)]


def partition_bound(m, fixed: Iterable[tuple], kind) -> LogScale:
    """Bound at the node fixing ``fixed`` row-column pairs.

    The product of the picked entries times the bound of what remains.
    """
    a = as_matrix(m, square=True)
    fixed = list(fixed)
    rows = [i for i, _ in fixed]
    cols = [j for _, j in fixed]
    if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
        raise ValueError("fixed pairs must use distinct rows and distinct columns")
    picked = LogScale.one()
    for i, j in fixed:
        picked = picked * float(a[i, j])
    if picked.is_zero():
        return LogScale.zero()
    return picked * bound(_minor(a, rows, cols), kind)


def check_nesting(m, kind, j: int) -> bool:
    """Whether branching on column ``j`` keeps the child bounds within U(A)."""
    a = as_matrix(m, square=True)
    parent = bound(a, kind).value
    total = 0.0
    for i in range(a.shape[0]):
        if a[i, j] > 0:
            total += a[i, j] * bound(_minor(a, [i], [j]), kind).value
    return bool(total <= parent * (1.0 + NEST_TOL))


@dataclass(frozen=True)
class DeepBound:
    """Depth-d bound ``U_d(A) = row_scale * gamma_N * g_n(J)`` with ``J = {0..d-1}``.

    ``matrix`` is the working matrix the table was built from (``A`` with
    the Huber-Law row scaling applied); samplers must run on it.
    Rows whose factor over the non-J columns vanishes are kept unscaled in
    ``table.b`` and get skip weight 0, which forces them into the drawn
    row set.
    """

    d: int
    kind: BoundKind
    matrix: np.ndarray
    log_row_scale: float
    gamma: np.ndarray
    table: DeepTable

    @property
    def columns(self) -> tuple:
        return tuple(range(self.d))

    @property
    def gamma_N(self) -> LogScale:
        pos = self.gamma[self.gamma > 0]
        return LogScale(float(np.log(pos).sum()))

    @property
    def value(self) -> LogScale:
        g = self.table.value
        if g <= 0:
            return LogScale.zero()
        return LogScale(self.log_row_scale + self.gamma_N.log + math.log(g))


def deep_bound(m, d: int, kind, *, depth_cap: int = DEPTH_CAP,
               memory_budget: int = MEMORY_BUDGET) -> DeepBound:
    a = as_matrix(m, square=True)
    kind = BoundKind.parse(kind)
    n = a.shape[0]
    if not 0 <= d <= n:
        raise ValueError(f"depth must lie in [0, {n}], got {d}")
    log_scale = 0.0
    if kind is BoundKind.HUBER_LAW:
        s = hl_row_scale(a)
        log_scale = float(np.log(s).sum())
        a = as_matrix(a / s[:, None])
    gamma = row_factors(a[:, d:], kind)
    vanish = gamma <= 0
    safe = np.where(vanish, 1.0, gamma)
    b = a[:, :d] / safe[:, None]
    skip = np.where(vanish, 0.0, 1.0)
    table = rper(b, skip, depth_cap=depth_cap, memory_budget=memory_budget)
    return DeepBound(d=d, kind=kind, matrix=a, log_row_scale=log_scale, gamma=gamma, table=table)
