# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _min4(double a, double b, double c, double d) nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    if d < m:
        m = d
    return m


def pair_gaps(track, lo, hi, track_u, track_v, track_len, dist):
    cdef long long[:] tr = np.ascontiguousarray(track, dtype=np.int64)
    cdef double[:] lo_ = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:] hi_ = np.ascontiguousarray(hi, dtype=np.float64)
    cdef long long[:] tu = np.ascontiguousarray(track_u, dtype=np.int64)
    cdef long long[:] tv = np.ascontiguousarray(track_v, dtype=np.int64)
    cdef double[:] tl = np.ascontiguousarray(track_len, dtype=np.float64)
    cdef double[:, :] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t m = tr.shape[0]
    out_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t i, j
    cdef long long ti, tj, ui, vi, uj, vj
    cdef double di0, di1, dj0, dj1, g
    with nogil:
        for i in range(m):
            ti = tr[i]
            ui = tu[ti]
            vi = tv[ti]
            di0 = lo_[i]
            di1 = tl[ti] - hi_[i]
            for j in range(i + 1, m):
                tj = tr[j]
                if ti == tj:
                    g = 0.0
                    if lo_[j] - hi_[i] > g:
                        g = lo_[j] - hi_[i]
                    if lo_[i] - hi_[j] > g:
                        g = lo_[i] - hi_[j]
                else:
                    uj = tu[tj]
                    vj = tv[tj]
                    dj0 = lo_[j]
                    dj1 = tl[tj] - hi_[j]
                    g = _min4(di0 + D[ui, uj] + dj0, di0 + D[ui, vj] + dj1,
                              di1 + D[vi, uj] + dj0, di1 + D[vi, vj] + dj1)
                out[i, j] = g
                out[j, i] = g
    return out_arr


def enumerate_optimum(int n_vars, owner, scope_ptr, scope_idx, beta):
    cdef long long[:] own_ = np.ascontiguousarray(owner, dtype=np.int64)
    cdef long long[:] ptr = np.ascontiguousarray(scope_ptr, dtype=np.int64)
    cdef long long[:] idx = np.ascontiguousarray(scope_idx, dtype=np.int64)
    cdef double[:, :] b = np.ascontiguousarray(beta, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n_fac = own_.shape[0]
    cdef long long s, best_state = 0
    cdef long long n_states = (<long long>1) << n_vars
    cdef double total, best = -np.inf
    cdef Py_ssize_t f, k
    cdef long long o, own, v
    with nogil:
        for s in range(n_states):
            total = 0.0
            for f in range(n_fac):
                o = own_[f]
                own = (s >> (n_vars - 1 - o)) & 1
                total += b[f, own]
                if own:
                    for k in range(ptr[f], ptr[f + 1]):
                        v = idx[k]
                        if v != o and (s >> (n_vars - 1 - v)) & 1:
                            total -= 1.0
            if total > best:
                best = total
                best_state = s
    return best, best_state
