"""Matrix preprocessing that leaves the permanent recoverable.

The pipeline drops entries that lie on no positive-weight permutation,
balances the matrix with Sinkhorn iterations and finally divides every
row by its largest entry.  All row and column divisors are accumulated in
log space, so ``per(original) = per(result.matrix) * exp(result.log_scale)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .logscale import LogScale
from .matrix import as_matrix


@dataclass(frozen=True)
class ScaledMatrix:
    matrix: np.ndarray
    log_scale: float
    support_mask: np.ndarray
    zero_permanent: bool = False

    @property
    def scale(self) -> LogScale:
        return LogScale(self.log_scale)

    def recover(self, per_scaled: float) -> float:
        """Permanent of the original matrix from that of ``self.matrix``."""
        return float(per_scaled * np.exp(self.log_scale))


def _matching(mask: np.ndarray) -> np.ndarray:
    """Column matched to each row (-1 when unmatched) in a maximum matching."""
    graph = scipy.sparse.csr_matrix(mask.astype(np.int8))
    return maximum_bipartite_matching(graph, perm_type="column")


def has_perfect_matching(m) -> bool:
    a = as_matrix(m, square=True)
    return bool(np.all(_matching(a > 0) >= 0))


def support_filter(m) -> tuple:
    """Zero every entry that lies on no permutation of positive weight.

    An entry ``(i, j)`` with ``a_ij > 0`` belongs to some perfect matching
    of the support graph iff it is matched in a fixed perfect matching or
    row ``i`` and the row matched to column ``j`` share a strongly
    connected component of the alternating digraph (edge ``i -> mate(j)``
    for each positive ``a_ij``).

    Returns ``(matrix, mask)``; the matrix is all zeros when no perfect
    matching exists.
    """
    a = as_matrix(m, square=True)
    n = a.shape[0]
    pos = a > 0
    match = _matching(pos)
    if np.any(match < 0):
        mask = np.zeros_like(pos)
        return as_matrix(np.zeros_like(a)), mask
    row_of = np.empty(n, dtype=np.int64)
    row_of[match] = np.arange(n)
    ii, jj = np.nonzero(pos)
    digraph = scipy.sparse.csr_matrix((np.ones(len(ii)), (ii, row_of[jj])), shape=(n, n))
    _, comp = connected_components(digraph, directed=True, connection="strong")
    keep = np.zeros_like(pos)
    keep[ii, jj] = comp[ii] == comp[row_of[jj]]
    keep[np.arange(n), match] = True
    return as_matrix(np.where(keep, a, 0.0)), keep


def sinkhorn(m, iterations: Optional[int] = None) -> ScaledMatrix:
    """Alternately normalize row sums and column sums to one.

    One iteration is a row pass followed by a column pass; the default is
    ``n**2`` iterations.
    """
    a = np.array(as_matrix(m, square=True))
    n = a.shape[0]
    iterations = n * n if iterations is None else iterations
    log_scale = 0.0
    for _ in range(iterations):
        r = a.sum(axis=1)
        if np.any(r <= 0):
            raise ValueError("Sinkhorn balancing needs every row to have a positive entry")
        a /= r[:, None]
        c = a.sum(axis=0)
        if np.any(c <= 0):
            raise ValueError("Sinkhorn balancing needs every column to have a positive entry")
        a /= c[None, :]
        log_scale += float(np.log(r).sum() + np.log(c).sum())
    return ScaledMatrix(as_matrix(a), log_scale, a > 0)


def row_max_divide(m) -> ScaledMatrix:
    a = as_matrix(m, square=True)
    s = a.max(axis=1)
    if np.any(s <= 0):
        raise ValueError("row-max division needs every row to have a positive entry")
    return ScaledMatrix(as_matrix(a / s[:, None]), float(np.log(s).sum()), a > 0)


def ds_pipeline(m, iterations: Optional[int] = None) -> ScaledMatrix:
    """Support filter, Sinkhorn balancing, then row-max division."""
    a = as_matrix(m, square=True)
    filtered, mask = support_filter(a)
    if not mask.any():
        return ScaledMatrix(filtered, 0.0, mask, zero_permanent=True)
    balanced = sinkhorn(filtered, iterations)
    final = row_max_divide(balanced.matrix)
    return ScaledMatrix(final.matrix, balanced.log_scale + final.log_scale, mask)
