# cython: boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels: edge ordering, Kruskal selection, the ladder walk.

Behavioural twin of ``_pure``; any divergence between the two backends is
a bug (tests compare them directly).
"""

import numpy as np

cimport numpy as cnp
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()

BACKEND = "cython"


def argsort_edges(cnp.float64_t[::1] dist):
    """Edge positions sorted by (distance, position).

    Positions enumerate the condensed upper triangle row-major, so this is
    exactly the (distance, i, j) candidate order Kruskal requires.
    """
    cdef Py_ssize_t m = dist.shape[0]
    cdef vector[pair[double, long long]] keyed
    keyed.resize(m)
    cdef Py_ssize_t idx
    for idx in range(m):
        keyed[idx].first = dist[idx]
        keyed[idx].second = idx
    sort(keyed.begin(), keyed.end())
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    for idx in range(m):
        out[idx] = keyed[idx].second
    return out


def kruskal_select(cnp.int64_t[::1] order, cnp.int32_t[::1] ii,
                   cnp.int32_t[::1] jj, int n):
    """Run Kruskal over candidate edges in the given order.

    order : condensed edge positions, already sorted by (distance, i, j)
    ii/jj : endpoint lookup per condensed position
    Returns the selected positions in acceptance order (< n-1 entries when
    the candidate set does not connect the graph).
    """
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent_arr = np.arange(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] size_arr = np.ones(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_arr = np.empty(n - 1, dtype=np.int64)
    cdef cnp.int32_t[::1] parent = parent_arr
    cdef cnp.int32_t[::1] size = size_arr
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t pos, taken = 0
    cdef cnp.int64_t m
    cdef int a, b, tmp, need = n - 1

    for pos in range(order.shape[0]):
        m = order[pos]
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
            tmp = a
            a = b
            b = tmp
        parent[b] = a
        size[a] += size[b]
        out[taken] = m
        taken += 1
        if taken == need:
            break
    return out_arr[:taken].copy()


def ladder_visits(int k0, cnp.float64_t[::1] uniforms, cnp.float64_t[:, ::1] cdf,
                  cnp.int32_t[:, ::1] jump, cnp.int32_t[::1] row_len,
                  long long burn_in, long long thin=1):
    """Walk the degree ladder and histogram the visited states.

    cdf[k] holds the cumulative row distribution over the jump choices in
    jump[k] (first row_len[k] entries are valid, last one is 1.0). A step
    picks the first choice whose cdf exceeds the uniform draw. States are
    recorded after every ``thin``-th post-burn-in step. Returns
    (visits, k_final).
    """
    cdef int k = k0
    cdef Py_ssize_t n_states = cdf.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] visits_arr = np.zeros(n_states, dtype=np.int64)
    cdef cnp.int64_t[::1] visits = visits_arr
    cdef Py_ssize_t step, lo, hi, mid
    cdef double u

    for step in range(uniforms.shape[0]):
        u = uniforms[step]
        lo = 0
        hi = row_len[k]
        while lo < hi:
            mid = (lo + hi) >> 1
            if cdf[k, mid] <= u:
                lo = mid + 1
            else:
                hi = mid
        if lo >= row_len[k]:
            lo = row_len[k] - 1
        k += jump[k, lo]
        if step >= burn_in and (step - burn_in) % thin == 0:
            visits[k] += 1
    return visits_arr, k
