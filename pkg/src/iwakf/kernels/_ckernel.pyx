# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar-measurement KF replay kernel.

Same contract as the pure-Python fallback in _pykernel.py; kept in lockstep
by tests comparing both backends on random problems.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def kf_run(A, c, Q, r, x0, P0, y):
    """Run the KF recursion over a measurement window (m = 1).

    Returns (innovations (N,), posterior means (N, n), final posterior
    covariance (n, n)).
    """
    cdef double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(np.ravel(c), dtype=np.float64)
    cdef double[:, ::1] Qm = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[::1] ym = np.ascontiguousarray(np.ravel(y), dtype=np.float64)
    cdef double rr = r
    cdef Py_ssize_t n = Am.shape[0]
    cdef Py_ssize_t N = ym.shape[0]

    x_arr = np.array(np.ravel(x0), dtype=np.float64).copy()
    P_arr = np.array(P0, dtype=np.float64).copy()
    innov_arr = np.empty(N, dtype=np.float64)
    xda_arr = np.empty((N, n), dtype=np.float64)
    tmpv_arr = np.empty(n, dtype=np.float64)
    tmpm_arr = np.empty((n, n), dtype=np.float64)
    pc_arr = np.empty(n, dtype=np.float64)

    cdef double[::1] x = x_arr
    cdef double[:, ::1] P = P_arr
    cdef double[::1] innov = innov_arr
    cdef double[:, ::1] xda = xda_arr
    cdef double[::1] xf = tmpv_arr
    cdef double[:, ::1] M = tmpm_arr
    cdef double[::1] Pc = pc_arr

    cdef Py_ssize_t k, i, j, t
    cdef double s, z, acc, ki

    for k in range(N):
        # forecast mean
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Am[i, j] * x[j]
            xf[i] = acc
        # forecast covariance: M = A P, P = M A^T + Q (symmetrized)
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for t in range(n):
                    acc += Am[i, t] * P[t, j]
                M[i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = Qm[i, j]
                for t in range(n):
                    acc += M[i, t] * Am[j, t]
                P[i, j] = acc
        for i in range(n):
            for j in range(i):
                P[i, j] = P[j, i]
        # innovation and gain
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += P[i, j] * cv[j]
            Pc[i] = acc
        s = rr
        z = ym[k]
        for i in range(n):
            s += cv[i] * Pc[i]
            z -= cv[i] * xf[i]
        for i in range(n):
            ki = Pc[i] / s
            x[i] = xf[i] + ki * z
        # posterior covariance P - K Pc^T, symmetrized
        for i in range(n):
            ki = Pc[i] / s
            for j in range(i, n):
                P[i, j] -= ki * Pc[j]
        for i in range(n):
            for j in range(i):
                P[i, j] = P[j, i]
        innov[k] = z
        for i in range(n):
            xda[k, i] = x[i]

    return innov_arr, xda_arr, P_arr
