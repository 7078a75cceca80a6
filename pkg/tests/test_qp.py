import numpy as np
import pytest

from cvxlse import _qp_py
from cvxlse._qp import qp_backend

try:
    from cvxlse import _qpcore
except ImportError:
    _qpcore = None

from oracles import solve_weighted_convex_lsq

BACKENDS = [("python", _qp_py.solve_convex_lsq)]
if _qpcore is not None:
    BACKENDS.append(("cython", _qpcore.solve_convex_lsq))


def trapezoid_weights(M, width=1.0):
    w = np.full(M + 1, width / M)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def random_instance(seed, M=60):
    rng = np.random.default_rng(seed)
    w = trapezoid_weights(M)
    z = rng.normal(size=M + 1) * rng.uniform(0.5, 3.0)
    b0, b1 = rng.uniform(1.0, 6.0, size=2)
    return w, z, b0, b1


@pytest.mark.parametrize("name,solve", BACKENDS)
def test_zero_data_collapses_to_zero(name, solve):
    M = 48
    g, mask, lam, _ = solve(trapezoid_weights(M), np.zeros(M + 1), 5.0, 5.0)
    assert np.max(np.abs(g[1:-1])) < 1e-12
    assert lam.min() >= -1e-10


@pytest.mark.parametrize("name,solve", BACKENDS)
@pytest.mark.parametrize("seed", range(8))
def test_matches_cvxopt_oracle(name, solve, seed):
    w, z, b0, b1 = random_instance(seed)
    g, mask, lam, it = solve(w, z, b0, b1)
    ref = solve_weighted_convex_lsq(w, z, b0, b1)
    assert np.max(np.abs(g - ref)) < 1e-6


@pytest.mark.parametrize("name,solve", BACKENDS)
@pytest.mark.parametrize("seed", range(6))
def test_kkt_certificate(name, solve, seed):
    w, z, b0, b1 = random_instance(seed, M=120)
    g, mask, lam, _ = solve(w, z, b0, b1)
    d2 = g[:-2] - 2 * g[1:-1] + g[2:]
    assert d2.min() >= -1e-9                      # primal feasibility
    assert g[0] == b0 and g[-1] == b1
    assert lam.min() >= -1e-9                     # dual feasibility
    # complementarity: multipliers vanish where the constraint is slack
    slack = d2 > 1e-8
    assert np.max(np.abs(lam[1:-1][slack])) < 1e-8
    # stationarity: W(g-z) = D2^T lam away from the boundary rows
    resid = w * (g - z)
    lhs = lam[:-2] - 2 * lam[1:-1] + lam[2:]
    assert np.max(np.abs(resid[1:-1] - lhs)) < 1e-9 * max(1.0, np.abs(resid).max())


@pytest.mark.skipif(_qpcore is None, reason="compiled kernel unavailable")
@pytest.mark.parametrize("seed", range(10))
def test_backends_agree(seed):
    w, z, b0, b1 = random_instance(seed, M=90)
    g1, m1, l1, _ = _qp_py.solve_convex_lsq(w, z, b0, b1)
    g2, m2, l2, _ = _qpcore.solve_convex_lsq(w, z, b0, b1)
    assert np.max(np.abs(g1 - g2)) < 1e-10
    assert np.array_equal(m1, m2)
    assert np.max(np.abs(l1 - l2)) < 1e-10


@pytest.mark.parametrize("name,solve", BACKENDS)
def test_warm_start_matches_cold(name, solve):
    # uniqueness surrogate: different initializations, same face
    w, z, b0, b1 = random_instance(3, M=100)
    g_cold, mask_cold, _, _ = solve(w, z, b0, b1)
    g_prev, mask_prev, _, _ = solve(w, z, b0 * 0.5, b1 * 0.5)
    g_prev = g_prev.copy()
    g_prev[0], g_prev[-1] = b0, b1               # raising ends keeps convexity
    g_warm, mask_warm, _, it_warm = solve(w, z, b0, b1,
                                          g_init=g_prev, knots_init=mask_prev)
    assert np.max(np.abs(g_warm - g_cold)) < 1e-8
    assert it_warm < 60


def test_objective_not_above_any_feasible_candidate():
    w, z, b0, b1 = random_instance(11)
    g, _, _, _ = _qp_py.solve_convex_lsq(w, z, b0, b1)

    def obj(v):
        return 0.5 * np.sum(w * (v - z) ** 2)

    rng = np.random.default_rng(0)
    M = len(w) - 1
    t = np.arange(M + 1) / M
    for _ in range(20):
        # random convex candidate with the right boundary values
        c = np.sort(rng.normal(size=M + 1))
        v = np.cumsum(np.concatenate([[0.0], c[:-1]])) / M
        v = v - t * v[-1]
        v = v + b0 + (b1 - b0) * t
        assert obj(g) <= obj(v) + 1e-12

    assert qp_backend() in ("python", "cython")
