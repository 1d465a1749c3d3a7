import itertools
import math

import numpy as np
import pytest

# counterexample to column-wise nesting of the Schrijver-Soules bound
C_MATRIX = np.array([
    [1, 1, 1, 1],
    [0, 0, 1, 1],
    [1, 1, 0, 0],
    [1, 1, 1, 1],
], dtype=float)


@pytest.fixture
def c_matrix():
    return C_MATRIX.copy()


def perm_weights(a):
    """Weight of every permutation, keyed by the column tuple."""
    n = a.shape[0]
    return {s: math.prod(a[i, s[i]] for i in range(n)) for s in itertools.permutations(range(n))}


def chi_square_ok(counts, probs, total):
    """Chi-square statistic against its mean + 3 sd (df = categories - 1)."""
    probs = np.asarray(probs, dtype=float)
    counts = np.asarray(counts, dtype=float)
    keep = probs > 0
    assert counts[~keep].sum() == 0
    exp = probs[keep] * total
    stat = float(((counts[keep] - exp) ** 2 / exp).sum())
    df = keep.sum() - 1
    return stat <= df + 3 * math.sqrt(2 * df), stat, df
