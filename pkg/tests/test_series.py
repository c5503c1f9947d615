from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from lindemann import core
from lindemann.core import Params
from lindemann.errors import OutOfDomain
from lindemann.series import (
    infinity_coeffs,
    infinity_eval,
    infinity_residual,
    lambert_w,
    lambert_w_exp,
    longtime_leading,
    origin_coeffs,
    origin_eval,
    origin_residual,
    phi_comparison,
)

P1 = Params(1.0)


def _sympy_origin(eps, order):
    """Match powers of x after substituting sum b_n x^n into the ODE."""
    x = sp.symbols("x")
    bs = sp.symbols(f"b2:{order + 1}")
    y = sum(b * x ** n for n, b in zip(range(2, order + 1), bs))
    e = sp.Rational(eps)
    expr = sp.expand(e * x * y * sp.diff(y, x) - x ** 2 * sp.diff(y, x) - x ** 2 + y + e * x * y)
    sol = {}
    for n in range(2, order + 1):
        eq = expr.coeff(x, n).subs(sol)
        sol[bs[n - 2]] = sp.solve(eq, bs[n - 2])[0]
    return [sol[b] for b in bs]


def _sympy_infinity(eps, order):
    """Same with sum rho_n x^{-n}, matched in powers of 1/x."""
    z = sp.symbols("z")  # z = 1/x
    rs = sp.symbols(f"r0:{order + 2}")  # r_k = rho_{k-1}
    y = sum(r * z ** (k - 1) for k, r in enumerate(rs))
    dy_dx = -z ** 2 * sp.diff(y, z)
    e = sp.Rational(eps)
    x = 1 / z
    expr = sp.expand((e * x * y * dy_dx - x ** 2 * dy_dx - x ** 2 + y + e * x * y) * z ** 2)
    sol = {}
    # powers z^0, z^1, ... fix rho_{-1}, rho_0, ...
    for k in range(order + 2):
        eq = sp.expand(expr.coeff(z, k).subs(sol))
        cands = sp.solve(eq, rs[k])
        # the leading balance is quadratic; the manifold takes the positive root
        sol[rs[k]] = max(cands) if k == 0 else cands[0]
    return [sol[r] for r in rs]


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0, 2.0, 7.0])
def test_origin_head(eps):
    s = origin_coeffs(Params(eps), 3)
    assert s.b(2) == 1.0
    assert s.b(3) == 2.0 - eps
    assert s.b(1) == 0 and s.b(0) == 0


def test_origin_examples():
    s = origin_coeffs(P1, 5)
    assert s.coeffs == (1.0, 1.0, 0.0, -5.0)
    assert origin_coeffs(Params(2.0), 3).b(3) == 0.0


@pytest.mark.parametrize("eps", [1, 2, Fraction(1, 2)])
def test_origin_matches_sympy(eps):
    exact = origin_coeffs(Fraction(eps), 8, exact=True)
    ref = _sympy_origin(eps, 8)
    assert [sp.Rational(c.numerator, c.denominator) for c in exact.coeffs] == ref
    floats = origin_coeffs(Params(float(eps)), 8)
    assert floats.coeffs == pytest.approx([float(c) for c in ref], rel=1e-14)


@pytest.mark.parametrize("eps", [0.5, 1.0, 3.0])
def test_infinity_head(eps):
    s = infinity_coeffs(Params(eps), 1)
    assert s.rho(-1) == pytest.approx(1.0 / eps, rel=1e-15)
    assert s.rho(0) == pytest.approx(-1.0 / (eps * (1.0 + eps)), rel=1e-15)
    assert s.rho(1) == pytest.approx(1.0 / (eps * (1.0 + eps) ** 2), rel=1e-15)


def test_infinity_examples():
    s = infinity_coeffs(P1, 2)
    assert s.coeffs == (1.0, -0.5, 0.25, -0.1875)
    assert s.order == 2


@pytest.mark.parametrize("eps", [1, 2, Fraction(1, 3)])
def test_infinity_matches_sympy(eps):
    exact = infinity_coeffs(Fraction(eps), 6, exact=True)
    ref = _sympy_infinity(eps, 6)
    assert [sp.Rational(c.numerator, c.denominator) for c in exact.coeffs] == ref


def test_invalid_orders():
    with pytest.raises(ValueError):
        origin_coeffs(P1, 1)
    with pytest.raises(ValueError):
        infinity_coeffs(P1, -2)
    assert infinity_coeffs(P1, -1).coeffs == (1.0,)


@pytest.mark.parametrize("eps", [1, 2])
@pytest.mark.parametrize("order", [3, 4, 5, 6])
def test_origin_residual_starts_above_order(eps, order):
    # the residual of the degree-N polynomial has no monomials of degree <= N
    s = origin_coeffs(Fraction(eps), order, exact=True)
    x = sp.symbols("x")
    y = sum(sp.Rational(c.numerator, c.denominator) * x ** n for n, c in enumerate(s.coeffs, start=2))
    e = sp.Integer(eps)
    poly = sp.Poly(sp.expand(e * x * y * sp.diff(y, x) - x ** 2 * sp.diff(y, x) - x ** 2 + y + e * x * y), x)
    degrees = [m[0] for m, c in zip(poly.monoms(), poly.coeffs()) if c != 0]
    assert min(degrees) >= order + 1
    # the Fraction residual agrees with the symbolic one at a sample point
    assert origin_residual(s, Fraction(1, 7)) == poly.eval(sp.Rational(1, 7))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def test_origin_eval_leading_term():
    s = origin_coeffs(P1, 30)
    est = origin_eval(s, 1e-4)
    assert abs(est.value / 1e-8 - 1.0) <= 1e-3


def test_origin_residual_slope():
    s = origin_coeffs(P1, 6)
    xs = np.logspace(-3, -2, 8)
    res = [abs(float(origin_residual(s, Fraction(float(x))))) for x in xs]
    slope = np.polyfit(np.log(xs), np.log(res), 1)[0]
    assert slope >= 6.9


def test_origin_truncation_activates():
    s = origin_coeffs(P1, 30)
    est = origin_eval(s, 0.5)
    assert est.truncation_index < s.order
    assert est.last_term_magnitude >= 0.0


def test_truncation_skips_zero_coefficient():
    # b4 = 0 at eps = 1 must not stop the sum
    s = origin_coeffs(P1, 30)
    est = origin_eval(s, 1e-3)
    assert est.truncation_index > 5


def test_infinity_eval_in_bracket():
    s = infinity_coeffs(P1, 30)
    v = infinity_eval(s, 50.0).value
    assert core.inflection_curve(P1, 50.0) < v < core.alpha(P1, 50.0)


def test_infinity_eval_limit():
    s = infinity_coeffs(P1, 30)
    assert abs(infinity_eval(s, 1e4).value - 1e4 - (-0.5)) <= 1e-3


def test_infinity_residual_slope():
    s = infinity_coeffs(P1, 5)
    xs = np.logspace(2, 3, 8)
    res = [abs(float(infinity_residual(s, Fraction(float(x))))) for x in xs]
    slope = np.polyfit(np.log(xs), np.log(res), 1)[0]
    assert slope <= -(5 - 1)


@pytest.mark.parametrize("order", [3, 10, 30])
def test_infinity_eval_close_to_alpha(order):
    s = infinity_coeffs(P1, order)
    for x in np.logspace(2, 4, 30):
        assert abs((core.alpha(P1, x) - infinity_eval(s, x).value) * x * x) <= 1.0


def test_eval_domain():
    with pytest.raises(OutOfDomain):
        origin_eval(origin_coeffs(P1, 5), 0.0)
    with pytest.raises(OutOfDomain):
        infinity_eval(infinity_coeffs(P1, 5), -1.0)


# --------------------------------------------------------------------------
# Lambert W and the comparison solution
# --------------------------------------------------------------------------

def test_lambert_w_examples():
    assert lambert_w(0.0) == 0.0
    assert lambert_w(math.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w(1.0) == pytest.approx(0.56714329040978, abs=1e-12)
    assert lambert_w(-1.0 / math.e) == pytest.approx(-1.0, abs=1e-7)
    with pytest.raises(OutOfDomain):
        lambert_w(-0.5)


def test_lambert_w_grid():
    zs = np.logspace(-6, 6, 1000)
    ws = [lambert_w(z) for z in zs]
    for z, w in zip(zs, ws):
        assert abs(w * math.exp(w) - z) <= 1e-12 * max(1.0, z)
    assert all(a < b for a, b in zip(ws, ws[1:]))


@settings(max_examples=300, deadline=None)
@given(st.floats(-1.0 / math.e + 1e-9, 1e300))
def test_lambert_w_against_mpmath(z):
    ref = float(mpmath.lambertw(z).real)
    # W has a square-root branch point at -1/e, so accuracy degrades there
    rel = 1e-13 if z > -0.35 else 1e-6
    assert lambert_w(z) == pytest.approx(ref, rel=rel, abs=1e-300)


@pytest.mark.parametrize("s", [-50.0, -1.0, 0.0, 3.0, 700.0, 1e4, 1e12])
def test_lambert_w_exp(s):
    with mpmath.workdps(30):
        ref = float(mpmath.lambertw(mpmath.exp(s)).real)
    assert lambert_w_exp(s) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("a, t0, u0", [(1.0, 0.0, 1.0), (0.5, 2.0, 0.3), (2.0, 1.0, 5.0)])
def test_phi_initial_value(a, t0, u0):
    assert phi_comparison(t0, a, t0, u0) == pytest.approx(u0, rel=1e-12)


@pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
def test_phi_solves_ode(t):
    a, u0 = 1.0, 1.0
    d = 1e-4 * t
    dphi = (phi_comparison(t + d, a, 0.0, u0) - phi_comparison(t - d, a, 0.0, u0)) / (2 * d)
    u = phi_comparison(t, a, 0.0, u0)
    assert dphi == pytest.approx(-u * u / (1.0 + a * u), rel=1e-6)


def test_phi_decreasing_and_positive():
    ts = np.logspace(-2, 12, 200)
    vals = [phi_comparison(t, 1.3, 0.0, 2.0) for t in ts]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_phi_large_t(a):
    # the next term is (a ln u0 + t0 - 1/u0)/t^2; t0 = u0 = 1 cancels it
    t = 1e8
    ratio = (phi_comparison(t, a, 1.0, 1.0) - 1.0 / t) * t * t / math.log(t)
    assert abs(ratio - a) <= 0.05 * a


@pytest.mark.parametrize("a, t0, u0", [(0.5, 0.0, 1.0), (1.0, 0.0, 1.0), (2.0, 3.0, 0.2)])
def test_phi_large_t_with_offset(a, t0, u0):
    t = 1e8
    lt = math.log(t)
    offset = (a * math.log(u0) + t0 - 1.0 / u0) / lt
    ratio = (phi_comparison(t, a, t0, u0) - 1.0 / t) * t * t / lt
    assert abs(ratio - a - offset) <= 0.01 * a


def test_phi_domain():
    with pytest.raises(OutOfDomain):
        phi_comparison(0.5, 1.0, 1.0, 1.0)
    with pytest.raises(OutOfDomain):
        phi_comparison(1.0, -1.0, 0.0, 1.0)


def test_longtime_leading_examples():
    assert longtime_leading(0.0, 100.0) == pytest.approx((0.01, 1e-4), rel=1e-15)
    x, _ = longtime_leading(P1, math.e)
    assert x == pytest.approx(1 / math.e + 1 / math.e ** 2, rel=1e-15)
    x, y = longtime_leading(P1, 1e6)
    assert abs(y / (x * x) - 1.0) <= 0.1
    with pytest.raises(OutOfDomain):
        longtime_leading(P1, 1.0)
