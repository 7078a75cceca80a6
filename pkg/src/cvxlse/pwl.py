"""Exact arithmetic on continuous piecewise-linear functions and step functions.

The two value types here, :class:`PiecewiseLinearFn` and :class:`StepFn`,
carry every estimator produced by this package (convex density and
regression fits, truths, empirical distribution functions).  All the
operations are exact up to floating round-off: antiderivatives are
segment-wise polynomial integrals, suprema are located at breakpoints,
jump limits or interior stationary points, never on a scan grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Extension policies: how eval behaves outside [first, last] breakpoint.
EXTEND = "extend"        # continue the terminal segments
CLAMP_RIGHT = "clamp"    # zero to the right of the last breakpoint

DEDUP_TOL = 1e-12        # abscissa dedup; merging keeps the leftmost value


def _dedup(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.ndim != 1 or x.shape != v.shape:
        raise ValueError("breakpoints and values must be 1-d arrays of equal length")
    if x.size and not np.all(np.diff(x) >= 0):
        raise ValueError("breakpoints must be sorted")
    if x.size:
        keep = np.empty(x.size, dtype=bool)
        keep[0] = True
        # keep the leftmost point of any cluster tighter than DEDUP_TOL
        keep[1:] = np.diff(x) > DEDUP_TOL * np.maximum(1.0, np.abs(x[1:]))
        x, v = x[keep], v[keep]
    return x, v


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function on [x[0], x[-1]].

    Parameters
    ----------
    x : array_like
        Strictly increasing breakpoints, length >= 2.
    v : array_like
        Function values at the breakpoints.
    extension : str
        ``"extend"`` continues the terminal segments outside the domain;
        ``"clamp"`` is zero right of the last breakpoint (densities).
        To the left of the first breakpoint both policies extend the
        first segment.
    """

    x: np.ndarray
    v: np.ndarray
    extension: str = EXTEND

    def __post_init__(self):
        x, v = _dedup(self.x, self.v)
        if x.size < 2:
            raise ValueError("need at least 2 distinct breakpoints")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints and values must be finite")
        if self.extension not in (EXTEND, CLAMP_RIGHT):
            raise ValueError(f"unknown extension policy {self.extension!r}")
        if self.extension == CLAMP_RIGHT and v[-1] < 0:
            raise ValueError("clamp-to-zero-right requires a nonnegative last value")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def slopes(self):
        return np.diff(self.v) / np.diff(self.x)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.interp(t, self.x, self.v)
        s = self.slopes
        left = t < self.x[0]
        if np.any(left):
            out[left] = self.v[0] + s[0] * (t[left] - self.x[0])
        right = t > self.x[-1]
        if np.any(right):
            if self.extension == CLAMP_RIGHT:
                out[right] = 0.0
            else:
                out[right] = self.v[-1] + s[-1] * (t[right] - self.x[-1])
        return float(out[0]) if scalar else out

    def derivative_left(self, t):
        """Slope of the segment adjacent to ``t`` on the left."""
        if t <= self.x[0]:
            if t == self.x[0]:
                raise ValueError("left derivative undefined at the first breakpoint")
            return float(self.slopes[0])
        if t > self.x[-1]:
            return 0.0 if self.extension == CLAMP_RIGHT else float(self.slopes[-1])
        i = int(np.searchsorted(self.x, t, side="left")) - 1
        return float(self.slopes[min(max(i, 0), self.slopes.size - 1)])

    def derivative_right(self, t):
        """Slope of the segment adjacent to ``t`` on the right."""
        if t >= self.x[-1]:
            if self.extension == CLAMP_RIGHT:
                return 0.0
            if t == self.x[-1]:
                raise ValueError("right derivative undefined at the last breakpoint")
            return float(self.slopes[-1])
        if t < self.x[0]:
            return float(self.slopes[0])
        i = int(np.searchsorted(self.x, t, side="right")) - 1
        return float(self.slopes[min(max(i, 0), self.slopes.size - 1)])

    def knots(self, tol=1e-9):
        """Interior breakpoints where the slope increases by more than tol."""
        ds = np.diff(self.slopes)
        return self.x[1:-1][ds > tol]

    def is_convex(self, tol=1e-9):
        ds = np.diff(self.slopes)
        return bool(ds.size == 0 or np.min(ds) >= -tol)

    def antiderivative(self, anchor_x=0.0, anchor_v=0.0):
        """Exact antiderivative through (anchor_x, anchor_v), a PiecewisePoly."""
        return _poly_from_pwl(self).antiderivative(anchor_x, anchor_v)

    def to_json(self):
        ext = "clamp" if self.extension == CLAMP_RIGHT else "extend"
        return json.dumps(
            {"x": [repr(float(a)) for a in self.x],
             "v": [repr(float(a)) for a in self.v],
             "ext": ext})

    @classmethod
    def from_json(cls, s):
        d = json.loads(s)
        ext = CLAMP_RIGHT if d["ext"] == "clamp" else EXTEND
        return cls(np.array([float(a) for a in d["x"]]),
                   np.array([float(a) for a in d["v"]]), ext)


@dataclass(frozen=True)
class StepFn:
    """Right-continuous step function: base value at -inf plus jumps."""

    jump_x: np.ndarray
    jump_s: np.ndarray
    base: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.jump_x, dtype=float)
        s = np.asarray(self.jump_s, dtype=float)
        if x.ndim != 1 or x.shape != s.shape:
            raise ValueError("jump locations/sizes must be 1-d arrays of equal length")
        if x.size and np.any(np.diff(x) <= 0):
            raise ValueError("jump locations must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s)) and np.isfinite(self.base)):
            raise ValueError("non-finite step function data")
        cum = self.base + np.concatenate([[0.0], np.cumsum(s)])
        for a in (x, s, cum):
            a.flags.writeable = False
        object.__setattr__(self, "jump_x", x)
        object.__setattr__(self, "jump_s", s)
        object.__setattr__(self, "_cum", cum)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        idx = np.searchsorted(self.jump_x, np.atleast_1d(t), side="right")
        out = self._cum[idx]
        return float(out[0]) if scalar else out

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        idx = np.searchsorted(self.jump_x, np.atleast_1d(t), side="left")
        out = self._cum[idx]
        return float(out[0]) if scalar else out


class PiecewisePoly:
    """Piecewise polynomial with local coefficients, used for exact integrals.

    Segment ``i`` covers ``[b[i], b[i+1]]`` and evaluates
    ``sum(c[i, k] * (t - b[i])**k)``.  Outside the breakpoint span the
    terminal polynomials extend, except under the clamp policy where the
    function is zero right of the last breakpoint.
    """

    def __init__(self, breakpoints, coeffs, extension=EXTEND):
        b = np.asarray(breakpoints, dtype=float)
        c = np.asarray(coeffs, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing, length >= 2")
        if c.ndim != 2 or c.shape[0] != b.size - 1:
            raise ValueError("coeffs must be (npieces, degree+1)")
        self.b = b
        self.c = c
        self.extension = extension

    @property
    def degree(self):
        return self.c.shape[1] - 1

    def _piece_index(self, t):
        idx = np.searchsorted(self.b, t, side="right") - 1
        return np.clip(idx, 0, self.c.shape[0] - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = self._piece_index(t)
        dt = t - self.b[idx]
        out = np.zeros_like(t)
        for k in range(self.c.shape[1] - 1, -1, -1):
            out = out * dt + self.c[idx, k]
        if self.extension == CLAMP_RIGHT:
            out = np.where(t > self.b[-1], 0.0, out)
        return float(out[0]) if scalar else out

    def piece_end_values(self):
        """Value of each polynomial piece at its right breakpoint."""
        widths = np.diff(self.b)
        vals = np.zeros(self.c.shape[0])
        for k in range(self.c.shape[1] - 1, -1, -1):
            vals = vals * widths + self.c[:, k]
        return vals

    def antiderivative(self, anchor_x=0.0, anchor_v=0.0):
        deg = self.c.shape[1]
        cc = np.zeros((self.c.shape[0], deg + 1))
        cc[:, 1:] = self.c / np.arange(1, deg + 1)
        inner = PiecewisePoly(self.b, cc, EXTEND)
        # stitch integration constants left to right for continuity
        cc[:, 0] = np.concatenate([[0.0], np.cumsum(inner.piece_end_values()[:-1])])
        b, coef = self.b, cc
        if self.extension == CLAMP_RIGHT:
            # constant continuation right of the support
            tail = PiecewisePoly(b, coef, EXTEND)(b[-1])
            coef = np.vstack([coef, [[tail] + [0.0] * deg]])
            b = np.concatenate([b, [b[-1] + max(1.0, abs(b[-1]))]])
        out = PiecewisePoly(b, coef, EXTEND)
        out.c[:, 0] += anchor_v - out(anchor_x)
        return out


def _poly_from_pwl(f: PiecewiseLinearFn) -> PiecewisePoly:
    return PiecewisePoly(f.x, np.column_stack([f.v[:-1], f.slopes]), f.extension)


def _poly_from_step(f: StepFn, lo, hi) -> PiecewisePoly:
    cut = f.jump_x[(f.jump_x > lo) & (f.jump_x < hi)]
    b = np.concatenate([[lo], cut, [hi]])
    return PiecewisePoly(b, f(b[:-1])[:, None], EXTEND)


def _materialized_poly(f, lo, hi) -> PiecewisePoly:
    """A plain EXTEND PiecewisePoly agreeing with f everywhere on [lo, hi]."""
    if isinstance(f, PiecewiseLinearFn):
        p = _poly_from_pwl(f)
    elif isinstance(f, StepFn):
        return _poly_from_step(f, lo, hi)
    elif isinstance(f, PiecewisePoly):
        p = f
    else:
        raise TypeError(f"unsupported function type {type(f)!r}")
    if p.extension == CLAMP_RIGHT and hi > p.b[-1]:
        b = np.concatenate([p.b, [hi + max(1.0, abs(hi))]])
        c = np.vstack([p.c, np.zeros((1, p.c.shape[1]))])
        return PiecewisePoly(b, c, EXTEND)
    return PiecewisePoly(p.b, p.c, EXTEND)


def _shift_poly(c, dt):
    """Coefficients of p(. + dt) given local coefficients c of p."""
    n = c.size
    out = np.zeros(n)
    for k in range(n):
        ck = c[k]
        if ck == 0.0:
            continue
        binom = 1.0
        for j in range(k + 1):
            out[j] += ck * binom * dt ** (k - j)
            binom = binom * (k - j) / (j + 1)
    return out


def _horner(c, t):
    out = 0.0
    for k in range(len(c) - 1, -1, -1):
        out = out * t + c[k]
    return float(out)


def _poly_roots_in(c, lo, hi):
    """Real roots strictly inside (lo, hi) for a low-degree polynomial."""
    c = np.asarray(c, dtype=float)
    nz = np.nonzero(np.abs(c) > 0)[0]
    if nz.size == 0:
        return np.empty(0)
    c = c[: nz[-1] + 1]
    if c.size <= 1:
        return np.empty(0)
    if c.size == 2:
        r = np.array([-c[0] / c[1]])
    elif c.size == 3:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4 * a * cc
        if disc < 0:
            return np.empty(0)
        q = -(b + np.copysign(np.sqrt(disc), b if b != 0 else 1.0)) / 2
        roots = [q / a]
        if q != 0:
            roots.append(cc / q)
        r = np.array(roots)
    else:
        r = np.roots(c[::-1])
        r = np.real(r[np.abs(np.imag(r)) < 1e-10])
    return r[(r > lo) & (r < hi)]


def sup_diff(f, g, interval, signed=False):
    """Exact supremum of |f - g| (or of f - g when ``signed``) on an interval.

    Both arguments may be :class:`PiecewiseLinearFn`, :class:`StepFn` or
    :class:`PiecewisePoly`.  The supremum is attained at a breakpoint, at a
    jump point (both one-sided limits are inspected) or at an interior
    stationary point of the polynomial difference; all candidates are
    enumerated, no scan grid is involved.

    Returns
    -------
    (value, argmax) : tuple of floats
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("empty interval")
    pf = _materialized_poly(f, lo, hi)
    pg = _materialized_poly(g, lo, hi)

    cuts = [np.array([lo, hi]), pf.b, pg.b]
    bpts = np.unique(np.concatenate(cuts))
    bpts = bpts[(bpts >= lo) & (bpts <= hi)]

    best = -np.inf
    best_at = lo

    def consider(val, at):
        nonlocal best, best_at
        v = val if signed else abs(val)
        if v > best:
            best, best_at = v, float(at)

    for t in bpts:
        consider(float(f(t)) - float(g(t)), t)  # actual (right-continuous) values

    for a, b in zip(bpts[:-1], bpts[1:]):
        mid = 0.5 * (a + b)
        ia, ig = int(pf._piece_index(mid)), int(pg._piece_index(mid))
        deg = max(pf.degree, pg.degree) + 1
        d = np.zeros(deg)
        cf = _shift_poly(pf.c[ia], a - pf.b[ia])
        cg = _shift_poly(pg.c[ig], a - pg.b[ig])
        d[: cf.size] += cf
        d[: cg.size] -= cg
        consider(_horner(d, 0.0), a)           # one-sided limits
        consider(_horner(d, b - a), b)
        dd = d[1:] * np.arange(1, d.size)
        for r in _poly_roots_in(dd, 0.0, b - a):
            consider(_horner(d, r), a + r)

    return best, best_at
