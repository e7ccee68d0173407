# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled matched-filter scan kernel.

For every snapshot y (one row of `y`) computes |g^H y|^2 against every grid
steering vector g (rows of `steer_conj`, already conjugated) and returns the
index of the first maximum together with the power at the peak and its two
neighbours (needed for parabolic peak refinement).

Complex inputs are split into contiguous real/imaginary planes up front;
the inner product then runs on flat double arrays, which the C compiler
vectorizes well.
"""
import numpy as np

cimport numpy as cnp


def mf_scan(cnp.complex128_t[:, ::1] y, cnp.complex128_t[:, ::1] steer_conj):
    cdef Py_ssize_t trials = y.shape[0]
    cdef Py_ssize_t nelem = y.shape[1]
    cdef Py_ssize_t npts = steer_conj.shape[0]
    if steer_conj.shape[1] != nelem:
        raise ValueError("steering matrix and snapshots disagree on element count")
    if npts == 0:
        raise ValueError("empty angle grid")

    y_np = np.asarray(y)
    s_np = np.asarray(steer_conj)
    yr_arr = np.ascontiguousarray(y_np.real)
    yi_arr = np.ascontiguousarray(y_np.imag)
    ar_arr = np.ascontiguousarray(s_np.real)
    ai_arr = np.ascontiguousarray(s_np.imag)

    idx_arr = np.empty(trials, dtype=np.int64)
    pl_arr = np.empty(trials, dtype=np.float64)
    pc_arr = np.empty(trials, dtype=np.float64)
    pr_arr = np.empty(trials, dtype=np.float64)
    row_arr = np.empty(npts, dtype=np.float64)

    cdef double[:, ::1] yr = yr_arr
    cdef double[:, ::1] yi = yi_arr
    cdef double[:, ::1] ar = ar_arr
    cdef double[:, ::1] ai = ai_arr
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] pl = pl_arr
    cdef double[::1] pc = pc_arr
    cdef double[::1] pr = pr_arr
    cdef double[::1] row = row_arr

    cdef Py_ssize_t t, g, n, best
    cdef double sr, si, p, bestp

    with nogil:
        for t in range(trials):
            best = 0
            bestp = -1.0
            for g in range(npts):
                sr = 0.0
                si = 0.0
                for n in range(nelem):
                    sr += ar[g, n] * yr[t, n] - ai[g, n] * yi[t, n]
                    si += ar[g, n] * yi[t, n] + ai[g, n] * yr[t, n]
                p = sr * sr + si * si
                row[g] = p
                if p > bestp:
                    bestp = p
                    best = g
            idx[t] = best
            pc[t] = bestp
            pl[t] = row[best - 1] if best > 0 else bestp
            pr[t] = row[best + 1] if best < npts - 1 else bestp

    return idx_arr, pl_arr, pc_arr, pr_arr
