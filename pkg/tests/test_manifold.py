from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from lindemann import core
from lindemann.core import Params
from lindemann.errors import OutOfDomain, SeamMismatch, Undecided
from lindemann.integrate import IntegratorConfig
from lindemann.manifold import (
    DEFAULT_GRID,
    SHOOTING_CONFIG,
    SlowManifold,
    SlowManifoldTable,
    _classify,
    bracket,
    compute_backward,
    compute_bisection,
    evaluate,
)
from lindemann.series import infinity_coeffs, infinity_eval, origin_coeffs

P1 = Params(1.0)
ALL_EPS = (0.1, 0.5, 1.0, 2.0, 10.0)


def _mp_gaps(eps: float, x: float) -> tuple[float, float]:
    """Reference ``(M - Y, alpha - M)`` at large ``x`` in 50-digit arithmetic,
    from the series at infinity and the middle root of the inflection cubic."""
    s = infinity_coeffs(Fraction(eps), 40, exact=True)
    with mpmath.workdps(50):
        xm = mpmath.mpf(x)
        e = mpmath.mpf(eps)
        terms = [mpmath.mpf(r.numerator) / r.denominator * xm ** (-n)
                 for n, r in enumerate(s.coeffs, start=-1)]
        m = terms[0] + terms[1]
        prev = None
        for t in terms[2:]:
            if prev is not None and abs(t) > prev:
                break
            m += t
            prev = abs(t)
        poly = lambda y: e * e * y ** 3 - 3 * e * xm * y ** 2 + ((2 - e) * xm ** 2 - xm) * y + xm ** 3
        y = mpmath.findroot(poly, mpmath.mpf(core.inflection_curve(Params(eps), x, method="cubic")))
        a = xm ** 2 / (e / (1 + e) + e * xm)
        return float(m - y), float(a - m)


# --------------------------------------------------------------------------
# bracket
# --------------------------------------------------------------------------

def test_bracket_examples():
    lo, hi = bracket(P1, 1.0)
    assert lo == pytest.approx(0.652704, abs=1e-5)
    assert hi == pytest.approx(0.666667, abs=1e-5)
    lo, hi = bracket(P1, 1e-2)
    assert hi - lo < 1e-4
    lo, hi = bracket(P1, 1e3)
    assert hi - lo <= 0.5 + 1e-3
    with pytest.raises(OutOfDomain):
        bracket(P1, 0.0)


# --------------------------------------------------------------------------
# backward sweep
# --------------------------------------------------------------------------

def test_backward_single_point():
    t = compute_backward(P1, [1.0])
    lo, hi = bracket(P1, 1.0)
    assert lo < t.values[0] < hi
    assert not t.clipped[0]
    assert t.method == "Backward"


def test_backward_matches_infinity_series():
    t = compute_backward(P1, [10.0])
    ref = infinity_eval(infinity_coeffs(P1, 8), 10.0).value
    assert abs(t.values[0] - ref) <= 1e-6


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_backward_start_insensitivity(eps):
    p = Params(eps)
    grid = np.logspace(-1, 1.5, 20)
    a = compute_backward(p, grid, start_fraction=0.1)
    b = compute_backward(p, grid, start_fraction=0.9)
    assert np.all(np.abs(a.values - b.values) <= 2.0 * a.est_error)


def test_table_invariants():
    t = compute_backward(P1, DEFAULT_GRID)
    assert len(t) == 200
    assert np.all(t.est_error >= 0.0)
    assert np.all((t.lower < t.values) & (t.values < t.upper))
    rows = list(t.rows())
    assert rows[0][0] == t.grid[0] and rows[0][-1] == "Backward"
    with pytest.raises(ValueError):
        SlowManifoldTable(1.0, np.array([2.0, 1.0]), *(np.zeros(2),) * 3, "Backward",
                          np.zeros(2), np.zeros(2, bool))
    with pytest.raises(OutOfDomain):
        compute_backward(P1, [0.0, 1.0])


# --------------------------------------------------------------------------
# shooting
# --------------------------------------------------------------------------

def test_bisection_matches_backward():
    b = compute_bisection(P1, 1.0, tol=1e-8)
    t = compute_backward(P1, [1.0])
    assert abs(b - t.values[0]) <= 1e-7


@pytest.mark.parametrize("eps", [0.1, 1.0, 2.0])
def test_bisection_spot_columns(eps):
    p = Params(eps)
    xs = DEFAULT_GRID[::40]
    t = compute_backward(p, xs)
    for x, m in zip(xs, t.values):
        assert abs(compute_bisection(p, x) - m) <= 1e-7


def test_classification_on_boundaries():
    x0 = 1.0
    assert _classify(P1, x0, core.H(P1, x0), 5.0, SHOOTING_CONFIG) == -1
    assert _classify(P1, x0, core.alpha(P1, x0), 5.0, SHOOTING_CONFIG) == 1


def test_bisection_undecided_with_short_span():
    with pytest.raises(Undecided):
        compute_bisection(P1, 1.0, tol=1e-12, span=1e-6, max_doublings=0)


def test_bisection_domain():
    with pytest.raises(OutOfDomain):
        compute_bisection(P1, -1.0)
    with pytest.raises(OutOfDomain):
        compute_bisection(P1, 1.0, tol=0.0)


# --------------------------------------------------------------------------
# blended evaluator
# --------------------------------------------------------------------------

def test_small_x_rate(manifold_of):
    m = manifold_of(1.0)
    for x in np.logspace(-3, -2, 10):
        assert (m(x) - core.H(P1, x)) / x ** 3 == pytest.approx(2.0, rel=0.2)


def test_large_x_alpha_closeness(manifold_of):
    m = manifold_of(1.0)
    for x in np.logspace(2, 4, 50):
        assert abs(m(x) - core.alpha(P1, x)) * x * x <= 1.0


@pytest.mark.parametrize("eps", ALL_EPS)
def test_slope_limits(manifold_of, eps):
    m = manifold_of(eps)
    x = 1e-4
    assert (m(1.01 * x) - m(0.99 * x)) / (0.02 * x) < 1e-3
    x = 1e4
    d = 1.0
    assert (m(x + d) - m(x - d)) / (2 * d) == pytest.approx(1.0 / eps, abs=1e-3)


@pytest.mark.parametrize("eps", ALL_EPS)
def test_sandwich_in_table_range(manifold_of, eps):
    p = Params(eps)
    m = manifold_of(eps)
    xs = np.logspace(-2, 2, 1000)
    vals = m.values(xs)
    for x, v in zip(xs, vals):
        assert core.inflection_curve(p, x, method="cubic") < v < core.alpha(p, x)
        assert v == m(x)


@pytest.mark.parametrize("eps", ALL_EPS)
def test_sandwich_to_1e4(manifold_of, eps):
    # both gaps shrink like powers of 1/x and eventually fall below one ulp
    # of M; a strict inequality is asserted wherever the reference gap spans
    # a few ulps, and no violation beyond rounding elsewhere
    p = Params(eps)
    m = manifold_of(eps)
    strict = 0
    for x in np.logspace(2, 4, 60):
        v = m(x)
        y = core.inflection_curve(p, x, method="cubic")
        a = core.alpha(p, x)
        below, above = _mp_gaps(eps, x)
        ulp = math.ulp(v)
        if below > 8.0 * ulp:
            assert y < v
            strict += 1
        else:
            assert v >= y - 2.0 * ulp
        if above > 8.0 * ulp:
            assert v < a
        else:
            assert v <= a + 2.0 * ulp
    assert strict >= 5


@pytest.mark.parametrize("eps", ALL_EPS)
def test_monotone_and_convex(manifold_of, eps):
    m = manifold_of(eps)
    xs = np.logspace(-2, 4, 600)
    vals = m.values(xs)
    assert np.all(np.diff(vals) > 0.0)
    for x0 in (0.02, 0.5, 3.0, 40.0, 200.0):
        h = 1e-2 * x0
        local = m.values(x0 + h * np.arange(-2, 3))
        assert np.all(np.diff(local, 2) > 0.0)


@pytest.mark.parametrize("eps", ALL_EPS)
def test_ode_residual_on_table(manifold_of, eps):
    p = Params(eps)
    m = manifold_of(eps)
    for x in np.logspace(-1.8, 1.8, 40):
        d = 1e-5 * x
        dm = (m(x + d) - m(x - d)) / (2 * d)
        assert abs(dm - core.scalar_slope(p, (x, m(x)))) <= 1e-4


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_nested_antifunnels(manifold_of, eps):
    p = Params(eps)
    m = manifold_of(eps)
    for frac in (0.1, 0.4, 0.7, 0.95):
        c = frac / eps
        for k in (1.01, 2.0, 10.0):
            x = k * core.xi(p, c)
            if 1e-2 <= x <= 1e4:
                assert core.isocline_F(p, x, c) < m(x)


def test_seams(manifold_of):
    for eps in ALL_EPS:
        assert max(manifold_of(eps).seam_mismatch) <= 1e-6


def test_seam_mismatch_with_low_order():
    with pytest.raises(SeamMismatch):
        SlowManifold.build(P1, origin_order=2, infinity_order=0, seam_tol=1e-10)


def test_evaluate_one_shot(manifold_of):
    m = manifold_of(1.0)
    v = evaluate(P1, 1.0, m.table, m.origin, m.infinity)
    assert v == m(1.0)
    with pytest.raises(OutOfDomain):
        m(0.0)


def test_evaluator_needs_covering_table():
    t = compute_backward(P1, [0.5, 1.0, 2.0])
    with pytest.raises(ValueError):
        SlowManifold(P1, t, origin_coeffs(P1, 10), infinity_coeffs(P1, 10))


def test_loose_tolerance_table_still_bracketed():
    t = compute_backward(P1, np.logspace(-1, 1, 20), IntegratorConfig(rtol=1e-7, atol=1e-10))
    assert np.all((t.lower <= t.values) & (t.values <= t.upper))
