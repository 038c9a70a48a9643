"""Pure numpy implementations of the hot kernels.

These mirror the compiled extension in ``_ckernels.pyx`` operation for
operation; the parity suite in tests/test_kernels.py holds the two together.
"""

import numpy as np


def drop_sweep(K, G, W, nlam, active):
    """One lexicographic coordinate-descent sweep over all pairs i < j.

    K is updated in place (both triangles, diagonal untouched). G = X'X of
    the fitting data, W the frozen symmetric penalty weights, nlam = n * lam.
    Pairs touching an inactive node are skipped. Returns the entrywise l1
    change accumulated over the sweep, counting both mirrored entries.
    """
    p = K.shape[0]
    delta = 0.0
    for i in range(p - 1):
        if not active[i]:
            continue
        ki = K[i]
        for j in range(i + 1, p):
            if not active[j]:
                continue
            kii = K[i, i]
            kjj = K[j, j]
            old = K[i, j]
            gij = G[i, j]
            # sums over m != i, j of K_im G_jm and K_jm G_im
            ti = ki @ G[j] - kii * gij - old * G[j, j]
            tj = K[j] @ G[i] - kjj * gij - old * G[i, i]
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
                delta += 2.0 * abs(new - old)
                K[i, j] = new
                K[j, i] = new
    return delta


def lasso_cd_gram(Q, b, gamma, beta, tol, max_iter):
    """Coordinate descent for 0.5 b'Qb - b'beta + gamma * ||beta||_1.

    Minimizes f(beta) = 0.5 beta'Q beta - b'beta + gamma ||beta||_1 with Q
    symmetric positive semidefinite and positive diagonal. beta is updated in
    place (it is the warm start). Convergence when the largest absolute
    coefficient change in a sweep drops below tol. Returns sweeps used.
    """
    d = beta.shape[0]
    q = Q @ beta
    it = 0
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
                q += Q[:, j] * diff
                beta[j] = new
                if abs(diff) > max_change:
                    max_change = abs(diff)
        if max_change < tol:
            break
    return it


def kendall_tau_brute(x, y):
    """Tau-b by explicit comparison of all n(n-1)/2 pairs.

    Vectorized through sign outer differences; memory O(n^2), intended for
    n <= 2000. Returns nan when either argument is constant.
    """
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(x.shape[0], 1)
    sx = dx[iu]
    sy = dy[iu]
    prod = sx * sy
    conc_minus_disc = np.count_nonzero(prod > 0) - np.count_nonzero(prod < 0)
    n0 = sx.shape[0]
    tx = np.count_nonzero(sx == 0)
    ty = np.count_nonzero(sy == 0)
    denom = np.sqrt(float(n0 - tx)) * np.sqrt(float(n0 - ty))
    if denom == 0.0:
        return float("nan")
    return conc_minus_disc / denom
