import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvxlse.pwl import (
    CLAMP_RIGHT,
    EXTEND,
    PiecewiseLinearFn,
    StepFn,
    sup_diff,
)


def tri():
    return PiecewiseLinearFn([0.0, 1.0], [2.0, 0.0], CLAMP_RIGHT)


def test_eval_midpoint():
    f = PiecewiseLinearFn([0.0, 1.0], [2.0, 0.0])
    assert f(0.5) == pytest.approx(1.0)


def test_eval_clamped_tail():
    assert tri()(1.5) == 0.0


def test_eval_extended_tail():
    f = PiecewiseLinearFn([0.0, 1.0], [2.0, 0.0], EXTEND)
    assert f(1.5) == pytest.approx(-1.0)


def test_one_sided_derivatives_at_kink():
    f = PiecewiseLinearFn([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
    assert f.derivative_left(1.0) == pytest.approx(-1.0)
    assert f.derivative_right(1.0) == pytest.approx(1.0)


def test_derivatives_linear_function():
    f = PiecewiseLinearFn([0.0, 1.0], [0.0, 1.0])
    for x in (0.25, 0.5, 0.99):
        assert f.derivative_left(x) == pytest.approx(1.0)
        assert f.derivative_right(x) == pytest.approx(1.0)


def test_derivatives_single_segment():
    f = PiecewiseLinearFn([0.0, 1.0], [2.0, 0.0])
    assert f.derivative_left(0.3) == pytest.approx(-2.0)
    assert f.derivative_right(0.3) == pytest.approx(-2.0)


def test_derivative_domain_errors():
    f = PiecewiseLinearFn([0.0, 1.0], [2.0, 0.0])
    with pytest.raises(ValueError):
        f.derivative_left(0.0)
    with pytest.raises(ValueError):
        f.derivative_right(1.0)


def test_antiderivative_triangular_mass():
    F = tri().antiderivative(0.0, 0.0)
    assert F(1.0) == pytest.approx(1.0, abs=1e-14)
    assert F(0.5) == pytest.approx(0.75, abs=1e-14)  # F0(t) = 2t - t^2
    assert F(2.0) == pytest.approx(1.0, abs=1e-14)   # flat past the support


def test_double_antiderivative():
    H = tri().antiderivative(0.0, 0.0).antiderivative(0.0, 0.0)
    assert H(1.0) == pytest.approx(2.0 / 3.0, abs=1e-14)  # int_0^1 (2s - s^2) ds


def test_knots_examples():
    f = PiecewiseLinearFn([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
    assert list(f.knots(1e-9)) == [1.0]
    lin = PiecewiseLinearFn([0.0, 2.0], [1.0, 3.0])
    assert lin.knots(1e-9).size == 0
    g = PiecewiseLinearFn([0.0, 1.0, 2.0, 3.0], [3.0, 1.0, 0.0, 0.0])
    assert list(g.knots(1e-9)) == [1.0, 2.0]


def test_is_convex():
    assert PiecewiseLinearFn([0, 1, 2], [1.0, 0.0, 1.0]).is_convex()
    assert not PiecewiseLinearFn([0, 1, 2], [0.0, 1.0, 0.0]).is_convex()
    assert PiecewiseLinearFn([0, 1], [0.0, 1.0]).is_convex()


def test_sup_diff_identical():
    f = tri()
    val, _ = sup_diff(f, f, (0.0, 1.0))
    assert val == 0.0


def test_sup_diff_vs_constant():
    f = tri()
    one = PiecewiseLinearFn([0.0, 1.0], [1.0, 1.0])
    val, arg = sup_diff(f, one, (0.0, 1.0))
    assert val == pytest.approx(1.0)
    assert arg in (0.0, 1.0)


def test_sup_diff_quadratic_vs_step():
    # F0(t) = 2t - t^2 against the one-point empirical CDF of {0.5}.
    F0 = tri().antiderivative(0.0, 0.0)
    Fn = StepFn([0.5], [1.0])
    val, arg = sup_diff(F0, Fn, (0.0, 1.0))
    assert val == pytest.approx(0.75, abs=1e-12)
    assert arg == pytest.approx(0.5)


def _random_pwl(rng, k):
    # unit-bounded slopes keep the scan oracle's kink error below 1e-6
    bx = np.sort(rng.random(k))
    bx[0], bx[-1] = 0.0, 1.0
    bx = np.unique(bx)
    v = np.concatenate([[rng.normal()], rng.uniform(-1, 1, bx.size - 1)])
    v = v[0] + np.concatenate([[0.0], np.cumsum(v[1:] * np.diff(bx))])
    return PiecewiseLinearFn(bx, v)


def test_sup_diff_grid_oracle():
    # random piecewise-linear pairs: exact sup matches a 1e6-point scan
    rng = np.random.default_rng(7)
    grid = np.linspace(0.0, 1.0, 1_000_001)
    for _ in range(8):
        f = _random_pwl(rng, 6)
        g = _random_pwl(rng, 4)
        exact, _ = sup_diff(f, g, (0.0, 1.0))
        scanned = np.max(np.abs(f(grid) - g(grid)))
        assert exact >= scanned - 1e-12
        assert exact == pytest.approx(scanned, abs=1e-6)


def test_sup_diff_step_pair_one_sided_limits():
    a = StepFn([0.3, 0.6], [0.5, 0.5])
    b = StepFn([0.5], [1.0])
    val, arg = sup_diff(a, b, (0.0, 1.0))
    # just left of 0.5: a=0.5, b=0 -> gap 0.5; just right: a=0.5, b=1 -> 0.5
    assert val == pytest.approx(0.5)
    assert 0.3 <= arg <= 0.6


def test_sup_diff_signed_mode():
    f = PiecewiseLinearFn([0.0, 1.0], [0.0, 0.0])
    g = PiecewiseLinearFn([0.0, 1.0], [1.0, 1.0])
    val, _ = sup_diff(f, g, (0.0, 1.0), signed=True)
    assert val == pytest.approx(-1.0)  # sup of f-g, stays negative


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_roundtrip_refit_identity(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 8))
    x = np.unique(np.round(rng.random(k) * 10, 3))
    if x.size < 2:
        x = np.array([0.0, 1.0])
    v = rng.normal(size=x.size)
    f = PiecewiseLinearFn(x, v)
    g = PiecewiseLinearFn(f.x, f.v, f.extension)  # re-fit through the vertices
    t = np.linspace(x[0] - 1, x[-1] + 1, 257)
    assert np.allclose(f(t), g(t), rtol=0, atol=0)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_antiderivative_exact_on_segments(seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.random(5)) * 4
    x[0] = 0.0
    if np.any(np.diff(x) < 1e-3):
        x = np.arange(5.0)
    v = rng.normal(size=5)
    f = PiecewiseLinearFn(x, v)
    F = f.antiderivative(x[0], 0.0)
    # closed-form segment integrals (trapezoid is exact for linear pieces)
    acc = 0.0
    for i in range(4):
        acc += 0.5 * (v[i] + v[i + 1]) * (x[i + 1] - x[i])
        assert F(x[i + 1]) == pytest.approx(acc, rel=1e-12, abs=1e-12)


def test_convexity_partition_roundtrip():
    # for convex f, knots + endpoints partition into maximal linear pieces
    f = PiecewiseLinearFn([0.0, 0.5, 1.0, 2.0, 3.0], [3.0, 1.5, 0.5, 0.5, 1.0])
    ks = f.knots(1e-9)
    pieces = np.concatenate([[f.x[0]], ks, [f.x[-1]]])
    g = PiecewiseLinearFn(pieces, f(pieces))
    t = np.linspace(0, 3, 301)
    assert np.allclose(f(t), g(t), atol=1e-12)


def test_json_roundtrip_bit_exact():
    rng = np.random.default_rng(3)
    f = PiecewiseLinearFn(np.sort(rng.random(5)) + np.arange(5) * 0.1,
                          rng.normal(size=5))
    g = PiecewiseLinearFn.from_json(f.to_json())
    assert np.array_equal(f.x, g.x)
    assert np.array_equal(f.v, g.v)
    assert f.extension == g.extension


def test_dedup_keeps_leftmost():
    f = PiecewiseLinearFn([0.0, 1.0, 1.0 + 1e-15, 2.0], [0.0, 1.0, 5.0, 0.0])
    assert f.x.size == 3
    assert f(1.0) == pytest.approx(1.0)


def test_validation_errors():
    with pytest.raises(ValueError):
        PiecewiseLinearFn([0.0], [1.0])
    with pytest.raises(ValueError):
        PiecewiseLinearFn([0.0, 1.0], [np.nan, 0.0])
    with pytest.raises(ValueError):
        PiecewiseLinearFn([0.0, 1.0], [1.0, -0.5], CLAMP_RIGHT)
    with pytest.raises(ValueError):
        StepFn([1.0, 0.5], [0.1, 0.1])


def test_stepfn_eval_and_limits():
    s = StepFn([0.25, 0.5, 0.75], [0.25, 0.5, 0.25], base=0.0)
    assert s(0.5) == pytest.approx(0.75)
    assert s.left_limit(0.5) == pytest.approx(0.25)
    assert s(0.1) == 0.0
    assert s(1.0) == pytest.approx(1.0)
