# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tag-stream kernels.

Exact behavioral twins of entnetsim._kernels._pykernels; that module is
the semantic reference. Timestamps are int64 picoseconds, sorted ascending.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def dead_time_prune(tags, long long dead_ps):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(tags, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] kept = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, m = 0
    cdef long long last
    if n == 0:
        return kept[:0]
    if dead_ps <= 0:
        return np.arange(n, dtype=np.int64)
    last = t[0] - dead_ps  # sentinel: first tag always accepted
    for i in range(n):
        if t[i] - last >= dead_ps:
            kept[m] = i
            m += 1
            last = t[i]
    return kept[:m].copy()


def greedy_match(a, b, long long offset, long long half_window):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ta = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tb = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t na = ta.shape[0], nb = tb.shape[0]
    cdef Py_ssize_t cap = na if na < nb else nb
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ia = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ib = np.empty(cap, dtype=np.int64)
    cdef Py_ssize_t i, j = 0, m = 0
    cdef long long lo, hi
    for i in range(na):
        lo = ta[i] + offset - half_window
        hi = ta[i] + offset + half_window
        while j < nb and tb[j] < lo:
            j += 1
        if j < nb and tb[j] <= hi:
            ia[m] = i
            ib[m] = j
            m += 1
            j += 1
    return ia[:m].copy(), ib[:m].copy()


def correlation_histogram(a, b, long long offset, long long bin_width,
                          Py_ssize_t n_bins):
    if bin_width <= 0 or n_bins <= 0:
        raise ValueError("bin_width and n_bins must be positive")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ta = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tb = np.ascontiguousarray(b, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_bins, dtype=np.int64)
    cdef Py_ssize_t na = ta.shape[0], nb = tb.shape[0]
    cdef long long span = (<long long> n_bins) * bin_width
    cdef long long lo = -(span // 2)
    cdef Py_ssize_t i, j, j_lo = 0
    cdef long long wlo, whi, d
    for i in range(na):
        wlo = ta[i] + offset + lo
        whi = wlo + span
        while j_lo < nb and tb[j_lo] < wlo:
            j_lo += 1
        j = j_lo
        while j < nb and tb[j] < whi:
            d = tb[j] - ta[i] - offset
            counts[(d - lo) // bin_width] += 1
            j += 1
    return counts
