# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled hot kernels: coordinate sweeps, gram-form lasso, pair counting.

Signatures and semantics match _pykernels.py exactly.
"""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def drop_sweep(double[:, ::1] K, double[:, ::1] G, double[:, ::1] W,
               double nlam, unsigned char[::1] active):
    cdef Py_ssize_t p = K.shape[0]
    cdef Py_ssize_t i, j, m
    cdef double delta = 0.0
    cdef double kii, kjj, old, gij, ti, tj, s0, s1, t, new
    for i in range(p - 1):
        if not active[i]:
            continue
        for j in range(i + 1, p):
            if not active[j]:
                continue
            kii = K[i, i]
            kjj = K[j, j]
            old = K[i, j]
            gij = G[i, j]
            ti = 0.0
            tj = 0.0
            for m in range(p):
                ti += K[i, m] * G[j, m]
                tj += K[j, m] * G[i, m]
            ti -= kii * gij + old * G[j, j]
            tj -= kjj * gij + old * G[i, i]
            s0 = 2.0 * gij * (1.0 / kii + 1.0 / kjj) \
                + (2.0 / (kii * kii)) * ti + (2.0 / (kjj * kjj)) * tj
            s1 = (2.0 / (kii * kii)) * G[j, j] + (2.0 / (kjj * kjj)) * G[i, i]
            if s1 <= 0.0:
                raise ValueError("curvature S1 <= 0: degenerate data column")
            t = nlam * W[i, j]
            if s0 > t:
                new = (t - s0) / s1
            elif s0 < -t:
                new = -(t + s0) / s1
            else:
                new = 0.0
            if new != old:
                delta += 2.0 * fabs(new - old)
                K[i, j] = new
                K[j, i] = new
    return delta


def lasso_cd_gram(double[:, ::1] Q, double[::1] b, double gamma,
                  double[::1] beta, double tol, int max_iter):
    cdef Py_ssize_t d = beta.shape[0]
    cdef Py_ssize_t j, m
    cdef int it = 0
    cdef double max_change, qjj, c, new, diff
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q_arr = \
        np.asarray(Q) @ np.asarray(beta)
    cdef double[::1] q = q_arr
    for it in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(d):
            qjj = Q[j, j]
            if qjj <= 0.0:
                raise ValueError("nonpositive diagonal in quadratic form")
            c = b[j] - (q[j] - qjj * beta[j])
            if c > gamma:
                new = (c - gamma) / qjj
            elif c < -gamma:
                new = (c + gamma) / qjj
            else:
                new = 0.0
            diff = new - beta[j]
            if diff != 0.0:
                for m in range(d):
                    q[m] += Q[m, j] * diff
                beta[j] = new
                if fabs(diff) > max_change:
                    max_change = fabs(diff)
        if max_change < tol:
            break
    return it


def kendall_tau_brute(double[::1] x, double[::1] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, l
    cdef long long conc_minus_disc = 0, tx = 0, ty = 0, n0
    cdef double dx, dy, denom
    for k in range(n - 1):
        for l in range(k + 1, n):
            dx = x[k] - x[l]
            dy = y[k] - y[l]
            if dx == 0.0:
                tx += 1
                if dy == 0.0:
                    ty += 1
            elif dy == 0.0:
                ty += 1
            elif (dx > 0.0) == (dy > 0.0):
                conc_minus_disc += 1
            else:
                conc_minus_disc -= 1
    n0 = (<long long> n) * (n - 1) // 2
    denom = sqrt(<double> (n0 - tx)) * sqrt(<double> (n0 - ty))
    if denom == 0.0:
        return float("nan")
    return conc_minus_disc / denom
