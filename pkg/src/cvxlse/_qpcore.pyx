# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel for the convexity-constrained weighted least squares QP.

Same primal active-set iteration as ``cvxlse._qp_py`` (the NumPy fallback);
see that module for the algorithm notes.  This version keeps the face
solves, line searches and multiplier recoveries in tight C loops, which is
what makes the Monte Carlo quantile table cheap.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef int _face_solve(long[::1] knots, Py_ssize_t nk,
                     double[::1] w, double[::1] z,
                     double b0, double b1,
                     double[::1] saa, double[::1] sab, double[::1] sbb,
                     double[::1] ra, double[::1] rb,
                     double[::1] diag, double[::1] off, double[::1] rhs,
                     double[::1] vf, double[::1] out) nogil:
    cdef Py_ssize_t M = w.shape[0] - 1
    cdef Py_ssize_t r = nk - 1
    cdef Py_ssize_t j, i, p, q
    cdef double L, th, a, wi, m
    if r == 1:
        for i in range(M + 1):
            out[i] = b0 + (b1 - b0) * (<double> i) / (<double> M)
        return 0
    for j in range(r):
        saa[j] = 0.0; sab[j] = 0.0; sbb[j] = 0.0; ra[j] = 0.0; rb[j] = 0.0
        p = knots[j]; q = knots[j + 1]
        L = <double> (q - p)
        for i in range(p, q):
            th = (<double> (i - p)) / L
            a = 1.0 - th
            wi = w[i]
            saa[j] += wi * a * a
            sab[j] += wi * a * th
            sbb[j] += wi * th * th
            ra[j] += wi * z[i] * a
            rb[j] += wi * z[i] * th
    sbb[r - 1] += w[M]
    rb[r - 1] += w[M] * z[M]

    for j in range(r - 1):
        diag[j] = sbb[j] + saa[j + 1]
        rhs[j] = rb[j] + ra[j + 1]
    for j in range(r - 2):
        off[j] = sab[j + 1]
    rhs[0] -= sab[0] * b0
    rhs[r - 2] -= sab[r - 1] * b1

    for j in range(1, r - 1):
        m = off[j - 1] / diag[j - 1]
        diag[j] -= m * off[j - 1]
        rhs[j] -= m * rhs[j - 1]
    vf[0] = b0
    vf[r] = b1
    vf[r - 1] = rhs[r - 2] / diag[r - 2]
    for j in range(r - 3, -1, -1):
        vf[j + 1] = (rhs[j] - off[j] * vf[j + 2]) / diag[j]

    for j in range(r):
        p = knots[j]; q = knots[j + 1]
        L = <double> (q - p)
        for i in range(p, q):
            th = (<double> (i - p)) / L
            out[i] = vf[j] * (1.0 - th) + vf[j + 1] * th
    out[M] = b1
    return 0


cdef void _multipliers(long[::1] knots, Py_ssize_t nk, double[::1] resid,
                       double[::1] u, double[::1] lam) nogil:
    cdef Py_ssize_t M = resid.shape[0] - 1
    cdef Py_ssize_t j, i, p, q
    cdef double cs1, cs2, uq
    for i in range(M + 1):
        lam[i] = 0.0
    for j in range(nk - 1):
        p = knots[j]; q = knots[j + 1]
        if q - p < 2:
            continue
        cs1 = 0.0
        cs2 = 0.0
        for i in range(p + 1, q + 1):
            u[i] = (<double> i) * cs1 - cs2
            if i < q:
                cs1 += resid[i]
                cs2 += resid[i] * (<double> i)
        uq = u[q]
        for i in range(p + 1, q):
            lam[i] = u[i] - (<double> (i - p)) / (<double> (q - p)) * uq


def solve_convex_lsq(w, z, double b0, double b1, g_init=None, knots_init=None,
                     double tol=1e-10, int max_iter=0):
    """Primal active-set solve; returns (g, knot_mask, lam, iterations)."""
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t M = wv.shape[0] - 1
    if max_iter <= 0:
        max_iter = 200 + 12 * M

    g_arr = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] g = g_arr
    knots_arr = np.empty(M + 1, dtype=np.int64)
    cdef long[::1] knots = knots_arr
    cdef Py_ssize_t nk
    cdef Py_ssize_t i, j

    if g_init is not None and knots_init is not None:
        gi = np.ascontiguousarray(g_init, dtype=np.float64)
        mask0 = np.asarray(knots_init, dtype=bool).copy()
        mask0[0] = mask0[M] = True
        idx0 = np.flatnonzero(mask0)
        nk = idx0.size
        for j in range(nk):
            knots[j] = idx0[j]
        for i in range(M + 1):
            g[i] = gi[i]
        g[0] = b0
        g[M] = b1
    else:
        for i in range(M + 1):
            g[i] = b0 + (b1 - b0) * (<double> i) / (<double> M)
        knots[0] = 0
        knots[1] = M
        nk = 2

    ghat_arr = np.empty(M + 1, dtype=np.float64)
    lam_arr = np.zeros(M + 1, dtype=np.float64)
    cdef double[::1] ghat = ghat_arr
    cdef double[::1] lam = lam_arr
    cdef double[::1] saa = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] sab = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] sbb = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] ra = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] rb = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] diag = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] off = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] rhs = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] vf = np.empty(M + 2, dtype=np.float64)
    cdef double[::1] resid = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] u = np.empty(M + 1, dtype=np.float64)

    cdef int it = 0
    cdef Py_ssize_t k, blocker, jmin
    cdef double d2g, d2d, ratio, alpha, lmin
    cdef bint done = False

    while it < max_iter:
        it += 1
        _face_solve(knots, nk, wv, zv, b0, b1, saa, sab, sbb, ra, rb,
                    diag, off, rhs, vf, ghat)
        alpha = 1.0
        blocker = -1
        for j in range(1, nk - 1):
            k = knots[j]
            d2g = g[k - 1] - 2.0 * g[k] + g[k + 1]
            d2d = (ghat[k - 1] - g[k - 1]) - 2.0 * (ghat[k] - g[k]) \
                + (ghat[k + 1] - g[k + 1])
            if d2d < -1e-14 * (1.0 + (d2g if d2g >= 0 else -d2g)):
                if d2g < 0.0:
                    d2g = 0.0
                ratio = d2g / (-d2d)
                if ratio < alpha:
                    alpha = ratio
                    blocker = k
        if blocker >= 0:
            for i in range(M + 1):
                g[i] = g[i] + alpha * (ghat[i] - g[i])
            j = 0
            for i in range(nk):
                if knots[i] != blocker:
                    knots[j] = knots[i]
                    j += 1
            nk = j
            continue
        for i in range(M + 1):
            g[i] = ghat[i]
            resid[i] = wv[i] * (g[i] - zv[i])
        _multipliers(knots, nk, resid, u, lam)
        lmin = 0.0
        jmin = -1
        for i in range(M + 1):
            if lam[i] < lmin:
                lmin = lam[i]
                jmin = i
        if lmin >= -tol or jmin < 0:
            done = True
            break
        # insert jmin keeping the knot list sorted
        j = nk
        while j > 0 and knots[j - 1] > jmin:
            knots[j] = knots[j - 1]
            j -= 1
        knots[j] = jmin
        nk += 1

    mask = np.zeros(M + 1, dtype=bool)
    for i in range(nk):
        mask[knots[i]] = True
    return g_arr, mask, lam_arr, it
