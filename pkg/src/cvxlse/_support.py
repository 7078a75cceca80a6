"""Support-reduction engines for the convex least squares estimators.

Both estimators minimize 0.5*int g^2 - int g dmu over a convex cone whose
extreme rays have closed forms, so the solver works with ray coefficients:

* density mode: g = sum_j c_j * e_{tau_j},  e_tau(t) = (1 - t/tau)_+, c >= 0,
  spanning the nonnegative convex integrable (hence decreasing) functions
  on [0, inf);
* regression mode: g = a0 + a1 t + sum_j c_j * (t - tau_j)_+, c >= 0,
  spanning the continuous convex functions on [0, 1].

The outer loop alternates three exact steps until the characterization
residuals vanish: a nonnegative least squares solve on the current support
(Lawson-Hanson), insertion of the global minimizer of the gap process
(located exactly; the gap is piecewise cubic), and moves of the support
points onto the exact stationarity roots of the gap derivative.  Support
points live in the continuum, not on a candidate grid: the gap derivative
must vanish at every knot for the characterization to hold, and no fixed
grid achieves that.
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import nnls


class ConvergenceError(RuntimeError):
    """Iteration cap hit before the characterization held; carries .fit."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


# ----------------------------------------------------------------------
# data-side processes (prefix sums; F is right-continuous)


class DensityData:
    def __init__(self, x, w):
        self.x = np.asarray(x, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self._cw = np.concatenate([[0.0], np.cumsum(self.w)])
        self._cwx = np.concatenate([[0.0], np.cumsum(self.w * self.x)])

    def F(self, t):
        return self._cw[np.searchsorted(self.x, t, side="right")]

    def F_left(self, t):
        return self._cw[np.searchsorted(self.x, t, side="left")]

    def Y(self, t):
        k = np.searchsorted(self.x, t, side="right")
        return self._cw[k] * t - self._cwx[k]


class RegressionData:
    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float)
        n = self.x.size
        yn = np.asarray(y, dtype=float) / n
        self._cy = np.concatenate([[0.0], np.cumsum(yn)])
        self._cyx = np.concatenate([[0.0], np.cumsum(yn * self.x)])

    def F(self, t):
        return self._cy[np.searchsorted(self.x, t, side="right")]

    def F_left(self, t):
        return self._cy[np.searchsorted(self.x, t, side="left")]

    def Y(self, t):
        k = np.searchsorted(self.x, t, side="right")
        return self._cy[k] * t - self._cyx[k]


# ----------------------------------------------------------------------
# model-side processes


class DensityModel:
    """g = sum c_j e_{tau_j}; closed forms for g, G = int g, H = int int g."""

    def __init__(self, taus, c):
        self.taus = np.asarray(taus, dtype=float)
        self.c = np.asarray(c, dtype=float)
        r = self.c / self.taus
        self._s1 = np.concatenate([np.cumsum(self.c[::-1])[::-1], [0.0]])
        self._s2 = np.concatenate([np.cumsum(r[::-1])[::-1], [0.0]])
        self._parea = np.concatenate([[0.0], np.cumsum(self.c * self.taus)]) / 2.0
        self._ph = np.concatenate([[0.0], np.cumsum(self.c * self.taus ** 2)]) / 6.0

    def mass(self):
        return float(self._parea[-1])

    def g(self, t):
        k = np.searchsorted(self.taus, t, side="left")
        return self._s1[k] - t * self._s2[k]

    def slope(self, t):
        k = np.searchsorted(self.taus, t, side="right")
        return -self._s2[k]

    def G(self, t):
        k = np.searchsorted(self.taus, t, side="left")
        return t * self._s1[k] - t * t / 2.0 * self._s2[k] + self._parea[k]

    def H(self, t):
        k = np.searchsorted(self.taus, t, side="left")
        return (t * t / 2.0 * self._s1[k] - t ** 3 / 6.0 * self._s2[k]
                + t * self._parea[k] - self._ph[k])


class RegressionModel:
    """g = a0 + a1 t + sum c_j (t - tau_j)_+ on [0, 1]."""

    def __init__(self, a0, a1, taus, c):
        self.a0 = float(a0)
        self.a1 = float(a1)
        self.taus = np.asarray(taus, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self._p1 = np.concatenate([[0.0], np.cumsum(self.c)])
        self._p2 = np.concatenate([[0.0], np.cumsum(self.c * self.taus)])
        self._p3 = np.concatenate([[0.0], np.cumsum(self.c * self.taus ** 2)])
        self._p4 = np.concatenate([[0.0], np.cumsum(self.c * self.taus ** 3)])

    def g(self, t):
        k = np.searchsorted(self.taus, t, side="right")
        return self.a0 + self.a1 * t + t * self._p1[k] - self._p2[k]

    def slope(self, t):
        k = np.searchsorted(self.taus, t, side="right")
        return self.a1 + self._p1[k]

    def G(self, t):
        k = np.searchsorted(self.taus, t, side="right")
        hinge = (t * t * self._p1[k] - 2.0 * t * self._p2[k] + self._p3[k]) / 2.0
        return self.a0 * t + self.a1 * t * t / 2.0 + hinge

    def H(self, t):
        k = np.searchsorted(self.taus, t, side="right")
        hinge = (t ** 3 * self._p1[k] - 3.0 * t * t * self._p2[k]
                 + 3.0 * t * self._p3[k] - self._p4[k]) / 6.0
        return self.a0 * t * t / 2.0 + self.a1 * t ** 3 / 6.0 + hinge


# ----------------------------------------------------------------------
# exact evaluation of the gap process D = H_model - Y_data


def _quad_roots(a2, a1, a0):
    """Vectorized real roots of a2 x^2 + a1 x + a0; nan where none."""
    a2 = np.asarray(a2, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    lin = np.abs(a2) < 1e-300
    with np.errstate(all="ignore"):
        disc = a1 * a1 - 4.0 * a2 * a0
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -(a1 + np.copysign(sq, np.where(a1 == 0.0, 1.0, a1))) / 2.0
        r1 = np.where(lin, np.where(np.abs(a1) > 1e-300, -a0 / a1, np.nan), q / a2)
        r2 = np.where(lin | (np.abs(q) < 1e-300), np.nan, a0 / q)
    r1 = np.where(~lin & (disc < 0), np.nan, r1)
    r2 = np.where(~lin & (disc < 0), np.nan, r2)
    return r1, r2


def _nodes(model, data, lo, hi):
    inner_x = data.x[(data.x > lo) & (data.x < hi)]
    inner_t = model.taus[(model.taus > lo) & (model.taus < hi)]
    return np.unique(np.concatenate([[lo, hi], inner_x, inner_t]))


def gap_scan(model, data, lo, hi):
    """Global minimum of D over [lo, hi]: returns (value, argmin)."""
    nodes = _nodes(model, data, lo, hi)
    D = model.H(nodes) - data.Y(nodes)
    k = int(np.argmin(D))
    best, best_at = float(D[k]), float(nodes[k])

    a = nodes[:-1]
    h = np.diff(nodes)
    d1 = model.G(a) - data.F(a)                  # D'(a+)
    f0 = model.g(a)                              # quadratic coefficients of D'
    s = model.slope((a + nodes[1:]) / 2.0)
    for d in _quad_roots(s / 2.0, f0, d1):
        m = np.isfinite(d) & (d > 0) & (d < h)
        if not np.any(m):
            continue
        t = a[m] + d[m]
        Dm = model.H(t) - data.Y(t)
        j = int(np.argmin(Dm))
        if Dm[j] < best:
            best, best_at = float(Dm[j]), float(t[j])
    return best, best_at


def dgap_at(model, data, t):
    """D'(t) with the right-continuous data value."""
    return model.G(t) - data.F(t)


def local_dgap_root(model, data, tau, lo, hi, max_pieces=8):
    """Exact root of D' nearest tau inside (lo, hi).

    D' is piecewise quadratic with jumps at data atoms.  Pieces are searched
    outward from the one containing tau; if no interior root shows up, a
    sign change across an atom (a kink root) is accepted.  Returns
    (new position, at_kink flag); tau itself when nothing is found.
    """
    cuts = _nodes(model, data, lo, hi)
    k0 = int(np.clip(np.searchsorted(cuts, tau, side="right") - 1, 0, cuts.size - 2))
    for radius in range(max_pieces):
        found = []
        for k in ({k0} if radius == 0 else {k0 - radius, k0 + radius}):
            if not 0 <= k <= cuts.size - 2:
                continue
            a, b = cuts[k], cuts[k + 1]
            d1 = float(model.G(a) - data.F(a))
            f0 = float(model.g(a))
            s = float(model.slope((a + b) / 2.0))
            for d in _quad_roots([s / 2.0], [f0], [d1]):
                if np.isfinite(d[0]) and 0.0 < d[0] < b - a:
                    found.append(a + float(d[0]))
        if found:
            return min(found, key=lambda t: abs(t - tau)), False
    atoms = data.x[(data.x > lo) & (data.x < hi)]
    if atoms.size:
        dl = model.G(atoms) - data.F_left(atoms)
        dr = model.G(atoms) - data.F(atoms)
        m = (dl <= 0) & (dr >= 0)                # minimum-shaped kink
        if np.any(m):
            cand = atoms[m]
            return float(cand[np.argmin(np.abs(cand - tau))]), True
    return float(tau), False


# ----------------------------------------------------------------------
# constrained least squares on a fixed support


def gram_density(taus):
    t = np.asarray(taus, dtype=float)
    lo = np.minimum.outer(t, t)
    hi = np.maximum.outer(t, t)
    return lo / 2.0 - lo * lo / (6.0 * hi)


def rhs_density(data, taus):
    return data.Y(taus) / taus


def gram_regression(taus):
    t = np.asarray(taus, dtype=float)
    J = t.size
    G = np.empty((J + 2, J + 2))
    G[0, 0] = 1.0
    G[0, 1] = G[1, 0] = 0.5
    G[1, 1] = 1.0 / 3.0
    if J:
        one_tau = (1.0 - t) ** 2 / 2.0
        t_tau = (1.0 - t) ** 3 / 3.0 + t * (1.0 - t) ** 2 / 2.0
        G[0, 2:] = G[2:, 0] = one_tau
        G[1, 2:] = G[2:, 1] = t_tau
        lo = np.minimum.outer(t, t)
        hi = np.maximum.outer(t, t)
        G[2:, 2:] = (1.0 - hi) ** 3 / 3.0 + (hi - lo) * (1.0 - hi) ** 2 / 2.0
    return G


def rhs_regression(data, taus):
    taus = np.asarray(taus, dtype=float)
    k = np.searchsorted(data.x, taus, side="right")
    tail_y = data._cy[-1] - data._cy[k]
    tail_yx = data._cyx[-1] - data._cyx[k]
    return np.concatenate([[data._cy[-1], data._cyx[-1]],
                           tail_yx - taus * tail_y])


def _chol_nnls(G, b):
    """argmin_{c>=0} 0.5 c'Gc - b'c via NNLS on the Cholesky factor."""
    jitter = 0.0
    for _ in range(6):
        try:
            R = cholesky(G + jitter * np.eye(G.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * np.trace(G) / G.shape[0])
    else:
        raise np.linalg.LinAlgError("gram factorization failed")
    y = solve_triangular(R.T, b, lower=True)
    c, _ = nnls(R, y)
    return c


def solve_support_density(data, taus):
    return _chol_nnls(gram_density(taus), rhs_density(data, taus))


def solve_support_regression(data, taus):
    """Affine part free, hinge coefficients nonnegative (Schur + NNLS)."""
    taus = np.asarray(taus, dtype=float)
    G = gram_regression(taus)
    b = rhs_regression(data, taus)
    Gaa = G[:2, :2]
    ba = b[:2]
    if taus.size == 0:
        a = np.linalg.solve(Gaa, ba)
        return a[0], a[1], np.zeros(0)
    Gah = G[:2, 2:]
    S = G[2:, 2:] - Gah.T @ np.linalg.solve(Gaa, Gah)
    r = b[2:] - Gah.T @ np.linalg.solve(Gaa, ba)
    c = _chol_nnls(S, r)
    a = np.linalg.solve(Gaa, ba - Gah @ c)
    return a[0], a[1], c


def objective_density(data, taus, c):
    G = gram_density(taus)
    b = rhs_density(data, taus)
    return float(0.5 * c @ G @ c - b @ c)


def objective_regression(data, taus, a0, a1, c):
    theta = np.concatenate([[a0, a1], c])
    G = gram_regression(taus)
    b = rhs_regression(data, taus)
    return float(0.5 * theta @ G @ theta - b @ theta)


# ----------------------------------------------------------------------
# outer loops


def _merge_close(taus, tol):
    if taus.size < 2:
        return taus
    keep = np.concatenate([[True], np.diff(taus) > tol])
    return taus[keep]


def _merge_clusters(taus, c, tol):
    """Coalesce support clusters tighter than tol into weighted means."""
    if taus.size < 2:
        return taus
    out = []
    j = 0
    while j < taus.size:
        k = j
        while k + 1 < taus.size and taus[k + 1] - taus[k] <= tol:
            k += 1
        if k == j:
            out.append(taus[j])
        else:
            ww = c[j:k + 1]
            out.append(float(np.dot(ww, taus[j:k + 1]) / np.sum(ww)))
        j = k + 1
    return np.asarray(out)


def fit_density_support(x, w, n, tol=1e-8, max_iter=None, tail_factor=1.5,
                        init_taus=None):
    """Support reduction for the density LSE.

    Returns dict with taus, c, iterations, objective trace, residuals.
    """
    data = DensityData(x, w)
    xmax = float(x[-1])
    T0 = tail_factor * xmax
    if init_taus is not None and len(init_taus):
        taus = np.sort(np.asarray(init_taus, dtype=float))
    else:
        taus = np.array([T0])
    if max_iter is None:
        max_iter = max(200, 10 * int(n))
    scale = max(1.0, float(data.Y(T0)))
    target_gap, accept_gap = 1e-12 * scale, tol * scale
    target_knot, accept_knot = 1e-12, tol
    cluster_tol = 1e-6 * T0

    trace = []
    state = None
    for it in range(1, max_iter + 1):
        taus = _merge_close(np.sort(taus), 1e-12 * T0)
        c = solve_support_density(data, taus)
        keep = c > 0
        if not np.any(keep):
            # all rays pruned: restart from the tail candidate
            taus = np.array([T0])
            c = solve_support_density(data, taus)
            keep = c > 0
        taus, c = taus[keep], c[keep]
        model = DensityModel(taus, c)
        T_end = max(T0, 1.25 * taus[-1])
        gmin, garg = gap_scan(model, data, 0.0, T_end)
        knot_err = float(np.max(np.abs(dgap_at(model, data, taus))))
        trace.append(objective_density(data, taus, c))
        state = (taus, c, model, gmin, garg, knot_err, it)
        if gmin >= -target_gap and knot_err <= target_knot:
            break
        if gmin < -target_gap and np.min(np.abs(taus - garg)) > cluster_tol \
                and garg > cluster_tol:
            taus = np.sort(np.append(taus, garg))
            continue
        # polish round: coalesce clusters, move interior knots onto the
        # stationarity roots of D', move the last knot to restore unit mass
        merged = _merge_clusters(taus, c, cluster_tol)
        if merged.size != taus.size:
            taus = merged
            continue
        new = taus.copy()
        bounds = np.concatenate([[0.0], taus, [T_end]])
        for j in range(taus.size - 1):
            lo = bounds[j] + cluster_tol
            hi = bounds[j + 2] - cluster_tol
            if lo < hi:
                new[j], _ = local_dgap_root(model, data, taus[j], lo, hi)
        rest = float(np.sum(c[:-1] * taus[:-1])) / 2.0
        if c[-1] > 0:
            tl = 2.0 * (1.0 - rest) / c[-1]
            lo = (taus[-2] if taus.size > 1 else 0.0) + cluster_tol
            new[-1] = min(max(tl, lo), T_end)
        taus = new
    else:
        taus, c, model, gmin, garg, knot_err, it = state
        if gmin < -accept_gap or knot_err > accept_knot:
            raise ConvergenceError(
                f"density LSE: residuals gap={gmin:.3e} knot={knot_err:.3e} "
                f"after {it} iterations", fit=state)

    taus, c, model, gmin, garg, knot_err, it = state
    return {
        "taus": taus, "c": c, "model": model, "iterations": it,
        "objective": objective_density(data, taus, c), "trace": trace,
        "min_gap": gmin, "min_gap_at": garg, "knot_err": knot_err,
        "data": data, "scan_hi": max(T0, 1.25 * taus[-1]),
    }


def fit_regression_support(x, y, n, tol=1e-8, max_iter=None, init_taus=None):
    """Support reduction for the regression LSE on [0, 1]."""
    data = RegressionData(x, y)
    taus = (np.sort(np.asarray(init_taus, dtype=float))
            if init_taus is not None and len(init_taus) else np.zeros(0))
    if max_iter is None:
        max_iter = max(200, 10 * int(n))
    scale = max(1.0, float(np.max(np.abs(
        data.Y(np.concatenate([data.x, [1.0]]))))))
    target_gap, accept_gap = 1e-13 * scale, tol * scale
    yscale = max(1.0, float(np.max(np.abs(y))))
    target_knot, accept_knot = 1e-13 * yscale, tol * yscale
    cluster_tol = 1e-7

    trace = []
    state = None
    for it in range(1, max_iter + 1):
        taus = _merge_close(np.sort(taus), 1e-13)
        a0, a1, c = solve_support_regression(data, taus)
        keep = c > 0
        taus, c = taus[keep], c[keep]
        model = RegressionModel(a0, a1, taus, c)
        gmin, garg = gap_scan(model, data, 0.0, 1.0)
        kink = np.isin(taus, data.x) if taus.size else np.zeros(0, dtype=bool)
        if taus.size:
            dR = np.abs(dgap_at(model, data, taus))
            dL = np.abs(model.G(taus) - data.F_left(taus))
            knot_err = float(np.max(np.where(kink, np.minimum(dR, dL), dR)))
        else:
            knot_err = 0.0
        trace.append(objective_regression(data, taus, a0, a1, c))
        state = (taus, c, a0, a1, model, gmin, garg, knot_err, it)
        if gmin >= -target_gap and knot_err <= target_knot:
            break
        dist = np.min(np.abs(taus - garg)) if taus.size else np.inf
        if gmin < -target_gap and dist > cluster_tol \
                and cluster_tol < garg < 1.0 - cluster_tol:
            taus = np.sort(np.append(taus, garg))
            continue
        if taus.size == 0:
            break
        merged = _merge_clusters(taus, c, cluster_tol)
        if merged.size != taus.size:
            taus = merged
            continue
        new = taus.copy()
        bounds = np.concatenate([[0.0], taus, [1.0]])
        for j in range(taus.size):
            lo = bounds[j] + cluster_tol
            hi = bounds[j + 2] - cluster_tol
            if lo < hi and not kink[j]:
                new[j], _ = local_dgap_root(model, data, taus[j], lo, hi)
        taus = new
    else:
        taus, c, a0, a1, model, gmin, garg, knot_err, it = state
        if gmin < -accept_gap or knot_err > accept_knot:
            raise ConvergenceError(
                f"regression LSE: residuals gap={gmin:.3e} knot={knot_err:.3e} "
                f"after {it} iterations", fit=state)

    taus, c, a0, a1, model, gmin, garg, knot_err, it = state
    return {
        "taus": taus, "c": c, "a0": a0, "a1": a1, "model": model,
        "iterations": it,
        "objective": objective_regression(data, taus, a0, a1, c),
        "trace": trace, "min_gap": gmin, "min_gap_at": garg,
        "knot_err": knot_err, "data": data,
    }
