"""Pure NumPy backend for the convexity-constrained weighted least squares QP.

Solves, on a uniform index grid 0..M,

    minimize   0.5 * sum_i w_i (g_i - z_i)^2
    subject to g_{i-1} - 2 g_i + g_{i+1} >= 0   (i = 1..M-1)
               g_0 = b0,  g_M = b1

by a primal active-set method.  The working set is the complement of the
"knot" set K (vertex indices where the second-difference constraint is
released); every face subproblem is a weighted least squares fit of a
piecewise-linear function with vertices at K, a tridiagonal solve.

The compiled extension ``cvxlse._qpcore`` implements the identical
iteration; this module is the importable fallback and the reference for
backend-equivalence tests.
"""

import numpy as np


def _face_solve(knots, w, z, b0, b1):
    """Weighted LS fit of a piecewise-linear g with vertices at ``knots``."""
    p = knots
    r = p.size - 1                     # number of intervals
    M = w.size - 1
    if r == 1:
        th = np.arange(M + 1) / M
        return b0 + (b1 - b0) * th

    L = np.diff(p).astype(float)
    seg = np.repeat(np.arange(r), np.diff(p))          # interval of i = 0..M-1
    i = np.arange(M)
    th = (i - p[seg]) / L[seg]
    a = 1.0 - th                                        # hat at left vertex
    wl = w[:M]
    zl = z[:M]
    S_aa = np.bincount(seg, wl * a * a, minlength=r)
    S_ab = np.bincount(seg, wl * a * th, minlength=r)
    S_bb = np.bincount(seg, wl * th * th, minlength=r)
    R_a = np.bincount(seg, wl * zl * a, minlength=r)
    R_b = np.bincount(seg, wl * zl * th, minlength=r)
    S_bb[r - 1] += w[M]                                 # grid end point, th = 1
    R_b[r - 1] += w[M] * z[M]

    # tridiagonal normal equations in the r-1 free vertex values
    diag = S_bb[:-1] + S_aa[1:]
    off = S_ab[1:-1]
    rhs = R_b[:-1] + R_a[1:]
    rhs[0] -= S_ab[0] * b0
    rhs[-1] -= S_ab[r - 1] * b1

    v = _thomas(diag.copy(), off, rhs.copy())
    vf = np.concatenate([[b0], v, [b1]])
    g = vf[seg] * a + vf[seg + 1] * th
    return np.concatenate([g, [b1]])


def _thomas(diag, off, rhs):
    """Symmetric tridiagonal solve, in-place on diag/rhs copies."""
    n = diag.size
    for k in range(1, n):
        m = off[k - 1] / diag[k - 1]
        diag[k] -= m * off[k - 1]
        rhs[k] -= m * rhs[k - 1]
    x = np.empty(n)
    x[-1] = rhs[-1] / diag[-1]
    for k in range(n - 2, -1, -1):
        x[k] = (rhs[k] - off[k] * x[k + 1]) / diag[k]
    return x


def _multipliers(knots, resid):
    """KKT multipliers of the active second-difference constraints.

    Solves lambda_{i-1} - 2 lambda_i + lambda_{i+1} = resid_i on each run of
    active indices between consecutive knots, zero at the knots.  Returns the
    full-length array (zeros at knots and boundary).
    """
    M = resid.size - 1
    lam = np.zeros(M + 1)
    for p, q in zip(knots[:-1], knots[1:]):
        if q - p < 2:
            continue
        rr = resid[p + 1:q]
        idx = np.arange(p + 1, q + 1, dtype=float)
        cs1 = np.concatenate([[0.0], np.cumsum(rr)])
        cs2 = np.concatenate([[0.0], np.cumsum(rr * np.arange(p + 1, q, dtype=float))])
        u = idx * cs1 - cs2                 # u_i = sum_{j<=i-1} (i-j) r_j, u_{p+1} = 0
        uq = u[-1]
        lam[p + 1:q] = u[:-1] - (idx[:-1] - p) / (q - p) * uq
    return lam


def solve_convex_lsq(w, z, b0, b1, g_init=None, knots_init=None,
                     tol=1e-10, max_iter=0):
    """Primal active-set solve; returns (g, knot_mask, lam, iterations).

    ``g_init``/``knots_init`` provide a feasible warm start (the boundary
    values of ``g_init`` are overwritten by b0/b1, which preserves convexity
    when the boundary values only grow).
    """
    w = np.ascontiguousarray(w, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    M = w.size - 1
    if max_iter <= 0:
        max_iter = 200 + 12 * M

    if g_init is not None and knots_init is not None:
        g = np.array(g_init, dtype=float)
        g[0], g[M] = b0, b1
        mask = np.array(knots_init, dtype=bool)
        mask[0] = mask[M] = True
        knots = np.flatnonzero(mask)
    else:
        g = b0 + (b1 - b0) * np.arange(M + 1) / M
        knots = np.array([0, M])

    lam = np.zeros(M + 1)
    it = 0
    while it < max_iter:
        it += 1
        ghat = _face_solve(knots, w, z, b0, b1)
        d = ghat - g
        interior = knots[1:-1]
        if interior.size:
            d2g = g[interior - 1] - 2 * g[interior] + g[interior + 1]
            d2d = d[interior - 1] - 2 * d[interior] + d[interior + 1]
            dec = d2d < -1e-14 * (np.abs(d2g) + 1.0)
        else:
            dec = np.zeros(0, dtype=bool)
        alpha = 1.0
        blocker = -1
        if interior.size and np.any(dec):
            ratios = np.maximum(d2g[dec], 0.0) / (-d2d[dec])
            jmin = int(np.argmin(ratios))
            if ratios[jmin] < 1.0:
                alpha = ratios[jmin]
                blocker = int(interior[dec][jmin])
        if blocker >= 0:
            g = g + alpha * d
            knots = knots[knots != blocker]
            continue
        g = ghat
        lam = _multipliers(knots, w * (g - z))
        j = int(np.argmin(lam))
        if lam[j] >= -tol:
            break
        knots = np.sort(np.append(knots, j))
    return g, np.isin(np.arange(M + 1), knots), lam, it
