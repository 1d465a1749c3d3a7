"""Compiled inner loops.

Everything here is ``numba.njit`` code over plain arrays.  The public
modules wrap these functions; tests compare them against independent
pure-Python oracles.

Conventions shared by the trial kernels:

* ``rows`` / ``cols`` hold the free row and column indices of the current
  node, compacted to the first ``m`` slots and kept in increasing order.
* Each trial reads its randomness from one row of a uniform array:
  slots ``[0, n)`` drive the depth-d backtracking, slots ``[n, 2n)`` one
  draw per tree level.
* Child bounds are computed as ratios to the parent bound, so no
  products of ``n`` bound factors are ever formed.
"""

import math

import numpy as np
from numba import njit

E = math.e
NEST_SLACK = 1e-12

STATUS_OK = 0
STATUS_NESTING = 1
STATUS_CAPACITY = 2


# ---------------------------------------------------------------- exact


@njit(cache=True, nogil=True)
def glynn_permanent(a):
    """Glynn's formula over a Gray code, O(2^(n-1) n)."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    colsum = np.zeros(n)
    for i in range(n):
        for j in range(n):
            colsum[j] += a[i, j]
    sign = np.ones(n)
    prod = 1.0
    for j in range(n):
        prod *= colsum[j]
    total = prod
    parity = 1.0
    for k in range(1, 1 << (n - 1)):
        bit = 0
        kk = k
        while (kk & 1) == 0:
            kk >>= 1
            bit += 1
        row = bit + 1
        if sign[row] > 0:
            sign[row] = -1.0
            for j in range(n):
                colsum[j] -= 2.0 * a[row, j]
        else:
            sign[row] = 1.0
            for j in range(n):
                colsum[j] += 2.0 * a[row, j]
        parity = -parity
        prod = 1.0
        for j in range(n):
            prod *= colsum[j]
        total += parity * prod
    return total / (1 << (n - 1))


@njit(cache=True, nogil=True)
def dsample(g, b, skip, u, tau):
    """Stochastic backtracking through the rectangular-permanent table.

    Walks rows n..1; row i is matched to column j with probability
    ``b[i,j] g[i-1, K-j] / g[i, K]`` or left unmatched with probability
    ``skip[i] g[i-1, K] / g[i, K]``.  Writes the drawn injection into
    ``tau`` (``tau[j]`` is the row of column j) and returns the number of
    options scanned, or -1 when the table has zero mass.
    """
    n = b.shape[0]
    d = b.shape[1]
    K = (1 << d) - 1
    if not g[n, K] > 0.0:
        return -1
    steps = 0
    for i in range(n, 0, -1):
        if K == 0:
            break
        gi = g[i, K]
        x = u[n - i] * gi
        acc = skip[i - 1] * g[i - 1, K]
        steps += 1
        if x < acc:
            continue
        chosen = -1
        last = -1
        for j in range(d):
            if (K >> j) & 1:
                w = b[i - 1, j] * g[i - 1, K ^ (1 << j)]
                steps += 1
                if w > 0.0:
                    last = j
                acc += w
                if x < acc and w > 0.0:
                    chosen = j
                    break
        if chosen < 0:
            # x fell past the last option only through rounding
            if last < 0:
                continue
            chosen = last
        tau[chosen] = i - 1
        K ^= 1 << chosen
    if K != 0:
        return -1
    return steps


# ---------------------------------------------------------------- Huber-Law


@njit(cache=True, nogil=True)
def hl_factor(r, nnz):
    """Row factor h(r)/e, zero for a row with no positive entries."""
    if nnz <= 0:
        return 0.0
    if r < 0.0:
        r = 0.0
    if r >= 1.0:
        return (r + 0.5 * math.log(r) + E - 1.0) / E
    return (1.0 + (E - 1.0) * r) / E


@njit(cache=True, nogil=True)
def hl_child_ratios(a, j, rows, m, r, nnz, out, q, f):
    """Ratios u(child_i)/u(node) for branching on column ``j``.

    ``out[k]`` refers to row ``rows[k]``.  Returns their sum, which is at
    most one because the Huber-Law bound nests.
    """
    for k in range(m):
        s = rows[k]
        fk = hl_factor(r[s], nnz[s])
        f[k] = fk
        if fk > 0.0:
            pos = 1 if a[s, j] > 0.0 else 0
            q[k] = hl_factor(r[s] - a[s, j], nnz[s] - pos) / fk
        else:
            q[k] = 0.0
    run = 1.0
    for k in range(m):
        out[k] = run
        run *= q[k]
    run = 1.0
    total = 0.0
    for k in range(m - 1, -1, -1):
        s = rows[k]
        if f[k] > 0.0:
            out[k] *= run * a[s, j] / f[k]
        else:
            out[k] = 0.0
        run *= q[k]
        total += out[k]
    return total


@njit(cache=True, nogil=True)
def hl_fix(a, rows, m, k, j, r, nnz):
    """Remove row ``rows[k]`` and column ``j``; update row sums.  Returns new m."""
    for t in range(k, m - 1):
        rows[t] = rows[t + 1]
    m -= 1
    hl_remove_column(a, rows, m, j, r, nnz)
    return m


@njit(cache=True, nogil=True)
def hl_remove_column(a, rows, m, j, r, nnz):
    """Subtract column ``j`` from the row sums of the free rows."""
    for t in range(m):
        s = rows[t]
        v = a[s, j]
        if v > 0.0:
            nnz[s] -= 1
            r[s] -= v
            if nnz[s] == 0:
                r[s] = 0.0


@njit(cache=True, nogil=True)
def _compact_free_rows(perm, rows):
    m = 0
    for i in range(perm.shape[0]):
        if perm[i] < 0:
            rows[m] = i
            m += 1
    return m


@njit(cache=True, nogil=True)
def hl_trials(a, d, g, b, skip, r0, nnz0, uniforms, accepted, perms, costs):
    """Run one static-column Huber-Law trial per row of ``uniforms``."""
    n = a.shape[0]
    rows = np.empty(n, np.int64)
    r = np.empty(n)
    nnz = np.empty(n, np.int64)
    tau = np.empty(max(d, 1), np.int64)
    out = np.empty(n)
    q = np.empty(n)
    f = np.empty(n)
    for t in range(uniforms.shape[0]):
        u = uniforms[t]
        perm = perms[t]
        perm[:] = -1
        cost = 0
        for s in range(n):
            r[s] = r0[s]
            nnz[s] = nnz0[s]
        if d > 0:
            steps = dsample(g, b, skip, u, tau)
            if steps < 0:
                accepted[t] = False
                costs[t] = n
                continue
            cost += steps
            for jj in range(d):
                perm[tau[jj]] = jj
        m = _compact_free_rows(perm, rows)
        ok = True
        for j in range(d, n):
            total = hl_child_ratios(a, j, rows, m, r, nnz, out, q, f)
            cost += m
            if total > 1.0 + NEST_SLACK:
                return STATUS_NESTING
            x = u[n + j - d]
            acc = 0.0
            pick = -1
            for k in range(m):
                acc += out[k]
                if x < acc:
                    pick = k
                    break
            if pick < 0:
                ok = False
                break
            perm[rows[pick]] = j
            m = hl_fix(a, rows, m, pick, j, r, nnz)
        accepted[t] = ok
        costs[t] = cost
    return STATUS_OK


# ---------------------------------------------------------------- Schrijver-Soules


@njit(cache=True, nogil=True)
def ss_child_ratios(a, rows, cols, m, orders, delta, f, w, out, colsum):
    """All ratios u(S_ij)/u(S) for free rows/columns of the node, O(m^2).

    ``orders[s, :m]`` lists the free columns of row s by nonincreasing
    entry.  ``out[k, c]`` is the ratio for row ``rows[k]`` and column
    ``cols[c]``; ``colsum[c]`` is its column total.  ``f[k]`` receives the
    Schrijver-Soules row factor, ``w`` is scratch indexed by column.
    Returns False when some row factor vanishes (the node has zero bound).
    """
    for k in range(m):
        s = rows[k]
        tot = 0.0
        for t in range(m):
            tot += a[s, orders[s, t]] * delta[t + 1]
        f[k] = tot
        if tot <= 0.0:
            return False
        # removing position t shifts every later entry up one weight slot
        suf = 0.0
        for t in range(1, m):
            suf += a[s, orders[s, t]] * delta[t]
        pre = 0.0
        for t in range(m):
            v = a[s, orders[s, t]]
            if t > 0:
                suf -= v * delta[t]
            w[k, orders[s, t]] = (pre + suf) / tot
            pre += v * delta[t + 1]
    for c in range(m):
        j = cols[c]
        run = 1.0
        for k in range(m):
            out[k, c] = run
            run *= w[k, j]
        run = 1.0
        total = 0.0
        for k in range(m - 1, -1, -1):
            s = rows[k]
            out[k, c] *= run * a[s, j] / f[k]
            run *= w[k, j]
            total += out[k, c]
        colsum[c] = total
    return True


@njit(cache=True, nogil=True)
def ss_fix(rows, cols, m, orders, i, j):
    """Remove row ``i`` and column ``j`` from the node.  Returns new m."""
    kk = 0
    for t in range(m):
        if rows[t] != i:
            rows[kk] = rows[t]
            kk += 1
    kk = 0
    for t in range(m):
        if cols[t] != j:
            cols[kk] = cols[t]
            kk += 1
    m -= 1
    for t in range(m):
        s = rows[t]
        kk = 0
        for p in range(m + 1):
            if orders[s, p] != j:
                orders[s, kk] = orders[s, p]
                kk += 1
    return m


@njit(cache=True, nogil=True)
def ss_sort_orders(a, rows, cols, m, orders):
    vals = np.empty(m)
    for k in range(m):
        s = rows[k]
        for c in range(m):
            vals[c] = -a[s, cols[c]]
        idx = np.argsort(vals, kind="mergesort")
        for c in range(m):
            orders[s, c] = cols[idx[c]]


@njit(cache=True, nogil=True)
def _argmin_column(colsum, m):
    best = 0
    for c in range(1, m):
        if colsum[c] < colsum[best]:
            best = c
    return best


@njit(cache=True, nogil=True)
def ss_partition(a, rows, cols, m, orders, delta, max_refinements,
                 leaf_rows, leaf_cols, leaf_len, leaf_ratio):
    """Partition the node by its minimizing column, refining on nesting failure.

    The partition is returned as leaves: leaf ``l`` fixes the pairs
    ``(leaf_rows[l, :leaf_len[l]], leaf_cols[l, :leaf_len[l]])`` and has
    bound ratio ``leaf_ratio[l]`` relative to the node.  While the ratios
    sum to more than one, the leaf with the largest ratio is replaced by
    its own minimizing partition.

    Returns ``(n_leaves, root_column, refinements, cost, status)``.
    """
    n = a.shape[0]
    f = np.empty(n)
    w = np.empty((n, n))
    out = np.empty((n, n))
    colsum = np.empty(n)
    if not ss_child_ratios(a, rows, cols, m, orders, delta, f, w, out, colsum):
        return 0, -1, 0, m * m, STATUS_OK
    cost = m * m
    c0 = _argmin_column(colsum, m)
    root = cols[c0]
    count = 0
    for k in range(m):
        if out[k, c0] > 0.0:
            leaf_rows[count, 0] = rows[k]
            leaf_cols[count, 0] = root
            leaf_len[count] = 1
            leaf_ratio[count] = out[k, c0]
            count += 1
    if colsum[c0] <= 1.0 + NEST_SLACK:
        return count, root, 0, cost, STATUS_OK

    sub_rows = np.empty(n, np.int64)
    sub_cols = np.empty(n, np.int64)
    sub_orders = np.empty((n, n), np.int64)
    max_leaves = leaf_ratio.shape[0]
    max_depth = leaf_rows.shape[1]
    refinements = 0
    while refinements < max_refinements:
        total = 0.0
        for l in range(count):
            total += leaf_ratio[l]
        if total <= 1.0 + NEST_SLACK:
            break
        # largest refinable leaf
        pick = -1
        for l in range(count):
            if leaf_len[l] < m and leaf_len[l] < max_depth:
                if pick < 0 or leaf_ratio[l] > leaf_ratio[pick]:
                    pick = l
        if pick < 0:
            break
        depth = leaf_len[pick]
        sm = 0
        for k in range(m):
            used = False
            for p in range(depth):
                if leaf_rows[pick, p] == rows[k]:
                    used = True
            if not used:
                sub_rows[sm] = rows[k]
                sm += 1
        sc = 0
        for c in range(m):
            used = False
            for p in range(depth):
                if leaf_cols[pick, p] == cols[c]:
                    used = True
            if not used:
                sub_cols[sc] = cols[c]
                sc += 1
        ss_sort_orders(a, sub_rows, sub_cols, sm, sub_orders)
        ok = ss_child_ratios(a, sub_rows, sub_cols, sm, sub_orders, delta, f, w, out, colsum)
        cost += sm * sm
        refinements += 1
        parent_ratio = leaf_ratio[pick]
        if not ok:
            leaf_ratio[pick] = 0.0
            continue
        cb = _argmin_column(colsum, sm)
        jc = sub_cols[cb]
        children = 0
        for k in range(sm):
            if out[k, cb] > 0.0:
                children += 1
        if count + children > max_leaves:
            return count, root, refinements, cost, STATUS_CAPACITY
        first = True
        for k in range(sm):
            ratio = out[k, cb]
            if ratio <= 0.0:
                continue
            if first:
                slot = pick
                first = False
            else:
                slot = count
                count += 1
                for p in range(depth):
                    leaf_rows[slot, p] = leaf_rows[pick, p]
                    leaf_cols[slot, p] = leaf_cols[pick, p]
            leaf_rows[slot, depth] = sub_rows[k]
            leaf_cols[slot, depth] = jc
            leaf_len[slot] = depth + 1
            leaf_ratio[slot] = parent_ratio * ratio
        if first:
            leaf_ratio[pick] = 0.0
    total = 0.0
    for l in range(count):
        total += leaf_ratio[l]
    if total > 1.0 + NEST_SLACK:
        return count, root, refinements, cost, STATUS_NESTING
    return count, root, refinements, cost, STATUS_OK


@njit(cache=True, nogil=True)
def adapart_trials(a, d, g, b, skip, order0, delta, max_refinements,
                   uniforms, accepted, perms, costs):
    """Run one AdaPart (dynamic column, Schrijver-Soules) trial per uniform row.

    ``order0[s]`` lists columns d..n-1 by nonincreasing ``a[s, :]``.
    """
    n = a.shape[0]
    nfree0 = n - d
    rows = np.empty(n, np.int64)
    cols = np.empty(n, np.int64)
    orders = np.empty((n, n), np.int64)
    tau = np.empty(max(d, 1), np.int64)
    max_depth = max_refinements + 1
    max_leaves = 1 + (max_refinements + 1) * n
    leaf_rows = np.empty((max_leaves, max_depth), np.int64)
    leaf_cols = np.empty((max_leaves, max_depth), np.int64)
    leaf_len = np.empty(max_leaves, np.int64)
    leaf_ratio = np.empty(max_leaves)
    for t in range(uniforms.shape[0]):
        u = uniforms[t]
        perm = perms[t]
        perm[:] = -1
        cost = 0
        if d > 0:
            steps = dsample(g, b, skip, u, tau)
            if steps < 0:
                accepted[t] = False
                costs[t] = n
                continue
            cost += steps
            for jj in range(d):
                perm[tau[jj]] = jj
        m = _compact_free_rows(perm, rows)
        for c in range(nfree0):
            cols[c] = d + c
        for k in range(m):
            s = rows[k]
            for c in range(nfree0):
                orders[s, c] = order0[s, c]
        level = 0
        ok = True
        while m > 0:
            count, root, nref, step_cost, status = ss_partition(
                a, rows, cols, m, orders, delta, max_refinements,
                leaf_rows, leaf_cols, leaf_len, leaf_ratio)
            cost += step_cost
            if status != STATUS_OK:
                return status
            x = u[n + level]
            level += 1
            acc = 0.0
            pick = -1
            for l in range(count):
                acc += leaf_ratio[l]
                if x < acc:
                    pick = l
                    break
            if pick < 0:
                ok = False
                break
            for p in range(leaf_len[pick]):
                i = leaf_rows[pick, p]
                j = leaf_cols[pick, p]
                perm[i] = j
                m = ss_fix(rows, cols, m, orders, i, j)
        accepted[t] = ok
        costs[t] = cost
    return STATUS_OK
