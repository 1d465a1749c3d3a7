"""Exact rejection samplers for weighted permutations.

Two strategies walk the partition tree of permutations:

* ``STATIC`` branches on columns in increasing order under the Huber-Law
  bound (the scheme of Huber and Law).
* ``ADAPART`` picks at every node the column whose child bounds sum to
  the least under the Schrijver-Soules bound, refining the partition when
  even that sum exceeds the parent bound.

With depth ``d > 0`` a trial starts by drawing a depth-d node directly
from the rectangular-permanent table, so the acceptance probability
becomes ``per A / U_d(A)``.

Randomness: trials are processed in blocks.  Block ``b`` of a run seeded
with ``seed`` draws its uniforms from
``PCG64(SeedSequence(seed, spawn_key=(b,)))``, so results do not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .bounds import BoundKind, DeepBound, deep_bound, hl_row_scale, ss_deltas
from .errors import NestingFailure, ZeroPermanentError
from .logscale import LogScale
from .matrix import as_matrix

DEFAULT_BLOCK = 1024
MAX_REFINEMENTS = 32
THREADS_ENV = "DEEPPERM_THREADS"


class Strategy(str, Enum):
    STATIC = "static"
    ADAPART = "adapart"


@dataclass(frozen=True)
class SamplerConfig:
    kind: BoundKind = BoundKind.HUBER_LAW
    depth: int = 0
    strategy: Optional[Strategy] = None
    seed: int = 0
    max_refinements: int = MAX_REFINEMENTS

    def __post_init__(self):
        kind = BoundKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        strategy = self.strategy
        if strategy is None:
            strategy = Strategy.STATIC if kind is BoundKind.HUBER_LAW else Strategy.ADAPART
        strategy = Strategy(strategy)
        object.__setattr__(self, "strategy", strategy)
        if strategy is Strategy.STATIC and kind is not BoundKind.HUBER_LAW:
            raise ValueError("static column order needs the Huber-Law bound; "
                             "Minc-Bregman and Schrijver-Soules do not nest column-wise")
        if strategy is Strategy.ADAPART and kind is not BoundKind.SCHRIJVER_SOULES:
            raise ValueError("AdaPart runs on the Schrijver-Soules bound")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def name(self) -> str:
        family = "HL" if self.strategy is Strategy.STATIC else "AdaPart"
        return f"{family}-{self.depth}"


@dataclass(frozen=True)
class TrialOutcome:
    accepted: bool
    permutation: Optional[tuple]
    trial_cost: int


@dataclass
class TrialBlock:
    """Results of consecutive trials; ``perms[t, i]`` is the column of row i."""

    accepted: np.ndarray
    arrivals: np.ndarray
    perms: np.ndarray
    costs: np.ndarray


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


class TrialRunner:
    """Compiled trial loop bound to one matrix and one deep bound."""

    def __init__(self, m, cfg: SamplerConfig, db: Optional[DeepBound] = None):
        if db is None:
            db = deep_bound(m, cfg.depth, cfg.kind)
        if db.kind is not cfg.kind or db.d != cfg.depth:
            raise ValueError("deep bound does not match the sampler configuration")
        self.cfg = cfg
        self.db = db
        self.bound = db.value
        a = np.ascontiguousarray(db.matrix)
        self.a = a
        self.n = n = a.shape[0]
        d = cfg.depth
        t = db.table
        self._table = (np.ascontiguousarray(t.g), np.ascontiguousarray(t.b), t.skip)
        if cfg.strategy is Strategy.STATIC:
            rest = a[:, d:]
            self._r0 = rest.sum(axis=1)
            self._nnz0 = (rest > 0).sum(axis=1).astype(np.int64)
        else:
            rest = a[:, d:]
            self._order0 = (np.argsort(-rest, axis=1, kind="stable") + d).astype(np.int64)
            self._delta = ss_deltas(n)

    @property
    def width(self) -> int:
        """Uniforms consumed per trial (the last one feeds the Exp(1) arrival)."""
        return 2 * self.n + 1

    def run(self, uniforms: np.ndarray) -> TrialBlock:
        uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
        size = uniforms.shape[0]
        accepted = np.zeros(size, dtype=np.bool_)
        perms = np.empty((size, self.n), dtype=np.int64)
        costs = np.zeros(size, dtype=np.int64)
        if self.bound.is_zero():
            perms.fill(-1)
        else:
            g, b, skip = self._table
            if self.cfg.strategy is Strategy.STATIC:
                status = _kernels.hl_trials(self.a, self.cfg.depth, g, b, skip, self._r0, self._nnz0,
                                            uniforms, accepted, perms, costs)
            else:
                status = _kernels.adapart_trials(self.a, self.cfg.depth, g, b, skip, self._order0,
                                                 self._delta, self.cfg.max_refinements,
                                                 uniforms, accepted, perms, costs)
            if status != _kernels.STATUS_OK:
                raise NestingFailure(
                    f"child bounds exceed the parent bound after {self.cfg.max_refinements} refinements")
        arrivals = -np.log1p(-uniforms[:, -1])
        return TrialBlock(accepted, arrivals, perms, costs)

    def blocks(self, seed: int, block_size: int = DEFAULT_BLOCK, threads: Optional[int] = None,
               start: int = 0) -> Iterator[TrialBlock]:
        """Endless stream of trial blocks in block order."""
        threads = threads or default_threads()

        def work(b: int) -> TrialBlock:
            return self.run(block_rng(seed, b).random((block_size, self.width)))

        b = start
        if threads == 1:
            while True:
                yield work(b)
                b += 1
        with ThreadPoolExecutor(threads) as pool:
            while True:
                for blk in pool.map(work, range(b, b + threads)):
                    yield blk
                b += threads


def sample_trial(m, db: DeepBound, cfg: SamplerConfig, rng: np.random.Generator) -> TrialOutcome:
    """One trial: accepts and returns sigma with probability ``a(sigma) / U_d(A)``."""
    runner = TrialRunner(m, cfg, db)
    blk = runner.run(rng.random((1, runner.width)))
    ok = bool(blk.accepted[0])
    perm = tuple(int(x) for x in blk.perms[0]) if ok else None
    return TrialOutcome(ok, perm, int(blk.costs[0]))


def acceptance_rate_estimate(m, cfg: SamplerConfig, trials: int, seed: Optional[int] = None,
                             threads: Optional[int] = None,
                             block_size: int = DEFAULT_BLOCK) -> tuple:
    """Run ``trials`` independent trials; return ``(accepts, trials, mean_trial_cost)``."""
    runner = TrialRunner(m, cfg)
    if runner.bound.is_zero():
        return 0, trials, 0.0
    seed = cfg.seed if seed is None else seed
    accepts = 0
    cost = 0
    done = 0
    for blk in runner.blocks(seed, block_size, threads):
        take = min(trials - done, len(blk.accepted))
        accepts += int(blk.accepted[:take].sum())
        cost += int(blk.costs[:take].sum())
        done += take
        if done >= trials:
            break
    return accepts, trials, cost / max(trials, 1)


# ---------------------------------------------------------------- incremental state


class SamplerState:
    """A node of the partition tree with the incremental bound caches.

    Tracks free rows and columns by index over the original matrix, the
    Huber-Law row sums over free columns, and for every free row its free
    columns sorted by nonincreasing entry.  ``fix`` moves to a child node.
    """

    def __init__(self, m, kind=BoundKind.HUBER_LAW):
        a = as_matrix(m, square=True)
        self.kind = BoundKind.parse(kind)
        self.weight_log = 0.0
        if self.kind is BoundKind.HUBER_LAW:
            s = hl_row_scale(a)
            self.weight_log = float(np.log(s).sum())
            a = a / s[:, None]
        self.a = np.ascontiguousarray(a)
        n = self.n = a.shape[0]
        self.m = n
        self.rows = np.arange(n, dtype=np.int64)
        self.cols = np.arange(n, dtype=np.int64)
        self.row_sums = self.a.sum(axis=1)
        self.nnz = (self.a > 0).sum(axis=1).astype(np.int64)
        self.orders = np.argsort(-self.a, axis=1, kind="stable").astype(np.int64)
        self.delta = ss_deltas(n)
        self.fixed: list = []

    @property
    def free_rows(self) -> np.ndarray:
        return self.rows[: self.m].copy()

    @property
    def free_cols(self) -> np.ndarray:
        return self.cols[: self.m].copy()

    def sorted_columns(self, i: int) -> np.ndarray:
        return self.orders[i, : self.m].copy()

    def fix(self, i: int, j: int) -> None:
        if i not in self.rows[: self.m] or j not in self.cols[: self.m]:
            raise ValueError(f"({i}, {j}) is not a free row/column pair")
        v = self.a[i, j]
        self.weight_log = self.weight_log + math.log(v) if v > 0 else -math.inf
        self.m = _kernels.ss_fix(self.rows, self.cols, self.m, self.orders, i, j)
        _kernels.hl_remove_column(self.a, self.rows, self.m, j, self.row_sums, self.nnz)
        self.fixed.append((i, j))

    def _log_factors(self, f: np.ndarray) -> float:
        if np.any(f[: self.m] <= 0) or self.weight_log == -math.inf:
            return -math.inf
        return self.weight_log + float(np.log(f[: self.m]).sum())

    def log_bound(self) -> LogScale:
        """u(S): picked entries times the bound of the remaining submatrix."""
        rows = self.rows[: self.m]
        if self.kind is BoundKind.HUBER_LAW:
            f = np.array([_kernels.hl_factor(self.row_sums[s], self.nnz[s]) for s in rows])
        elif self.kind is BoundKind.SCHRIJVER_SOULES:
            f = np.array([self.a[s, self.orders[s, : self.m]] @ self.delta[1: self.m + 1] for s in rows])
        else:
            raise ValueError("incremental bounds are kept for Huber-Law and Schrijver-Soules only")
        lg = self._log_factors(f) if self.m else self.weight_log
        return LogScale(lg) if lg > -math.inf else LogScale.zero()


def hl_column_bounds(state: SamplerState, j: int) -> np.ndarray:
    """Huber-Law bounds of the children fixing ``(i, j)``, indexed by row ``i``."""
    n, m = state.n, state.m
    out, q, f = np.zeros(n), np.empty(n), np.empty(n)
    _kernels.hl_child_ratios(state.a, j, state.rows, m, state.row_sums, state.nnz, out, q, f)
    parent = state._log_factors(f)
    res = np.zeros(n)
    if parent > -math.inf:
        res[state.rows[:m]] = out[:m] * math.exp(parent)
    return res


def ss_all_bounds(state: SamplerState) -> np.ndarray:
    """Schrijver-Soules bounds of every child ``(i, j)`` of the node, O(m^2)."""
    n, m = state.n, state.m
    f, w = np.empty(n), np.zeros((n, n))
    out, colsum = np.zeros((n, n)), np.empty(n)
    res = np.zeros((n, n))
    ok = _kernels.ss_child_ratios(state.a, state.rows, state.cols, m, state.orders, state.delta,
                                  f, w, out, colsum)
    if not ok:
        return res
    parent = state._log_factors(f)
    rows, cols = state.rows[:m], state.cols[:m]
    res[np.ix_(rows, cols)] = out[:m, :m] * math.exp(parent)
    return res


@dataclass(frozen=True)
class Partition:
    """Children chosen for a node: each leaf is a tuple of fixed pairs
    with probability ``u(leaf) / u(S)``.  The remainder is the reject mass."""

    column: int
    leaves: tuple
    refinements: int = 0

    @property
    def reject_probability(self) -> float:
        return max(0.0, 1.0 - sum(p for _, p in self.leaves))


def adapart_pick_column(state: SamplerState, max_refinements: int = MAX_REFINEMENTS) -> Partition:
    """Column minimizing the child-bound sum (smallest index on ties).

    When that sum exceeds ``u(S)``, the largest child is replaced by its
    own minimizing partition until the sum fits or ``max_refinements``
    rounds are spent, in which case :class:`NestingFailure` is raised.
    """
    n, m = state.n, state.m
    if m == 0:
        raise ValueError("no free column left")
    max_depth = max_refinements + 1
    max_leaves = 1 + (max_refinements + 1) * n
    lr = np.empty((max_leaves, max_depth), np.int64)
    lc = np.empty((max_leaves, max_depth), np.int64)
    ll = np.empty(max_leaves, np.int64)
    lp = np.empty(max_leaves)
    count, root, nref, _, status = _kernels.ss_partition(
        state.a, state.rows, state.cols, m, state.orders, state.delta, max_refinements, lr, lc, ll, lp)
    if status != _kernels.STATUS_OK:
        raise NestingFailure(f"no nesting partition within {max_refinements} refinements")
    leaves = tuple(
        (tuple((int(lr[k, p]), int(lc[k, p])) for p in range(ll[k])), float(lp[k]))
        for k in range(count) if lp[k] > 0
    )
    return Partition(column=int(root), leaves=leaves, refinements=int(nref))
