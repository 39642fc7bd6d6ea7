"""Pure-Python twins of the compiled kernels.

Same signatures and same results as ``_fast``; selected automatically when
the extension is unavailable (or forced via MSTDYN_PURE_PYTHON=1).
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

BACKEND = "python"


def argsort_edges(dist):
    """Edge positions sorted by (distance, position).

    Positions enumerate the condensed upper triangle row-major, so this is
    exactly the (distance, i, j) candidate order Kruskal requires (a stable
    sort on the distance key alone achieves it).
    """
    return np.argsort(dist, kind="stable").astype(np.int64)


def kruskal_select(order, ii, jj, n):
    """Run Kruskal over candidate edges in the given order.

    order : condensed edge positions, already sorted by (distance, i, j)
    ii/jj : endpoint lookup per condensed position
    Returns the selected positions in acceptance order (< n-1 entries when
    the candidate set does not connect the graph).
    """
    parent = list(range(n))
    size = [1] * n
    out = []
    need = n - 1
    for m in order:
        a = ii[m]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = jj[m]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        out.append(m)
        if len(out) == need:
            break
    return np.asarray(out, dtype=np.int64)


def ladder_visits(k0, uniforms, cdf, jump, row_len, burn_in, thin=1):
    """Walk the degree ladder and histogram the visited states.

    cdf[k] holds the cumulative row distribution over the jump choices in
    jump[k] (first row_len[k] entries are valid, last one is 1.0). A step
    picks the first choice whose cdf exceeds the uniform draw. States are
    recorded after every ``thin``-th post-burn-in step. Returns
    (visits, k_final).
    """
    k = int(k0)
    n_states = cdf.shape[0]
    visits = np.zeros(n_states, dtype=np.int64)
    cdf_rows = [list(cdf[s, : row_len[s]]) for s in range(n_states)]
    jump_rows = [list(jump[s, : row_len[s]]) for s in range(n_states)]
    for step, u in enumerate(uniforms):
        row = cdf_rows[k]
        pick = bisect_right(row, u)
        if pick >= len(row):
            pick = len(row) - 1
        k += jump_rows[k][pick]
        if step >= burn_in and (step - burn_in) % thin == 0:
            visits[k] += 1
    return visits, k
