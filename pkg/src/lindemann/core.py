"""Closed-form objects of the nondimensional Lindemann system.

The planar system is

    x' = -x**2 + eps*x*y,      y' = x**2 - (1 + eps*x)*y,

and the scalar reduction is ``dy/dx = f(x, y)`` with ``f = g2/g1``.  Everything
in this module is an explicit formula (or a bracketed root of one); the
numerical integrators live in :mod:`lindemann.integrate`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    DegenerateRoots,
    DenominatorZero,
    NonpositiveRate,
    OutOfDomain,
    PoleAtMinusOne,
    PoleAtX,
)

_EPS_MACH = np.finfo(float).eps


@dataclass(frozen=True)
class Params:
    """The single dimensionless parameter ``eps = k_{-1}/k_1``."""

    eps: float

    def __post_init__(self):
        eps = float(self.eps)
        if not (math.isfinite(eps) and eps > 0.0):
            raise OutOfDomain(f"eps must be positive and finite, got {self.eps!r}")
        object.__setattr__(self, "eps", eps)


class PhasePoint(NamedTuple):
    x: float
    y: float

    @property
    def in_quadrant(self) -> bool:
        return self.x >= 0.0 and self.y >= 0.0


class TangentData(NamedTuple):
    trace: float
    det: float
    lambda_plus: float
    lambda_minus: float
    sigma_plus: float
    sigma_minus: float

    @property
    def discriminant(self) -> float:
        return self.trace * self.trace - 4.0 * self.det


class RegionLabel(enum.Enum):
    BelowH = "BelowH"
    OnH = "OnH"
    BetweenHAndY = "BetweenHAndY"
    OnY = "OnY"
    BetweenYAndAlpha = "BetweenYAndAlpha"
    OnAlpha = "OnAlpha"
    BetweenAlphaAndV = "BetweenAlphaAndV"
    OnV = "OnV"
    AboveV = "AboveV"


class NondimResult(NamedTuple):
    params: Params
    point: PhasePoint
    time_scale: float


def _eps_of(p: Union[Params, float]) -> float:
    return p.eps if isinstance(p, Params) else float(p)


# --------------------------------------------------------------------------
# vector field and slope field
# --------------------------------------------------------------------------

def vector_field(p: Params, pt) -> tuple[float, float]:
    """Right-hand side ``(dx/dt, dy/dt)`` of the planar system."""
    x, y = pt
    e = p.eps
    return -x * x + e * x * y, x * x - (1.0 + e * x) * y


def _slope_denominator(e: float, x: float, y: float) -> float:
    den = -x * x + e * x * y
    # |den| at roundoff level means the point is on V (or x = 0)
    scale = x * x + abs(e * x * y)
    if x == 0.0 or abs(den) <= 4.0 * _EPS_MACH * scale:
        raise DenominatorZero(f"scalar slope undefined at ({x!r}, {y!r})")
    return den


def scalar_slope(p: Params, pt) -> float:
    """Slope field ``f(x, y)`` of the scalar reduction ``dy/dx = f``.

    Raises
    ------
    DenominatorZero
        On the vertical isocline ``y = x/eps`` or on the y-axis.
    """
    x, y = pt
    e = p.eps
    den = _slope_denominator(e, x, y)
    return (x * x - (1.0 + e * x) * y) / den


# --------------------------------------------------------------------------
# isoclines
# --------------------------------------------------------------------------

def k_of_c(c: float) -> float:
    """``K(c) = 1/(1+c)``, the isocline shape constant."""
    if c == -1.0:
        raise PoleAtMinusOne("K(c) has a pole at c = -1")
    return 1.0 / (1.0 + c)


def isocline_F(p: Params, x: float, c: float) -> float:
    """Isocline of slope ``c``: ``F(x, c) = x**2 / (K(c) + eps*x)``."""
    den = k_of_c(c) + p.eps * x
    if den == 0.0:
        raise PoleAtX(f"isocline for slope {c!r} has its asymptote at x = {x!r}")
    return x * x / den


def isocline_F_prime(p: Params, x: float, c: float) -> float:
    """Closed-form ``dF/dx = x (2K + eps x) / (K + eps x)**2``."""
    k = k_of_c(c)
    den = k + p.eps * x
    if den == 0.0:
        raise PoleAtX(f"isocline for slope {c!r} has its asymptote at x = {x!r}")
    return x * (2.0 * k + p.eps * x) / (den * den)


def H(p: Params, x):
    """Horizontal isocline (QSSA curve)."""
    return x * x / (1.0 + p.eps * x)


def V(p: Params, x):
    """Vertical isocline (equilibrium-approximation line)."""
    return x / p.eps


def alpha(p: Params, x):
    """Isocline of slope ``1/eps``; the upper wall of the thinnest antifunnel."""
    e = p.eps
    return x * x / (e / (1.0 + e) + e * x)


def isocline(p: Params, kind, x: float) -> float:
    """Evaluate an isocline by name.

    ``kind`` is one of ``"H"``, ``"V"``, ``"alpha"``, or a real slope ``c``
    selecting ``F(x, c)``.
    """
    if isinstance(kind, str):
        key = kind.lower()
        if key == "h":
            return H(p, x)
        if key == "v":
            return V(p, x)
        if key == "alpha":
            return alpha(p, x)
        raise ValueError(f"unknown isocline kind {kind!r}")
    return isocline_F(p, x, float(kind))


# --------------------------------------------------------------------------
# xi and its inverse
# --------------------------------------------------------------------------

def xi(p: Params, c: float) -> float:
    """Abscissa where the isocline of slope ``c`` switches fence type.

    ``xi(c) = (K(c)/eps) (1/sqrt(1 - eps c) - 1)`` for ``0 < c < 1/eps``.
    """
    e = p.eps
    if not (0.0 < c < 1.0 / e) or not (_one_minus_prod(e, c) > 0.0):
        raise OutOfDomain(f"xi needs 0 < c < 1/eps, got c={c!r}")
    return _sqrt_term(e, c) / ((1.0 + c) * e)


def _split(a: float) -> tuple[float, float]:
    t = 134217729.0 * a
    hi = t - (t - a)
    return hi, a - hi


def _one_minus_prod(a: float, b: float) -> float:
    """``1 - a*b`` with the product rounding error restored (Dekker)."""
    prod = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - prod) + ah * bl + al * bh) + al * bl
    return (1.0 - prod) - err


def _sqrt_term(e: float, c: float) -> float:
    """``1/sqrt(1 - eps c) - 1`` accurate at both ends of ``(0, 1/eps)``."""
    u = e * c
    if u < 0.5:
        return math.expm1(-0.5 * math.log1p(-u))
    return 1.0 / math.sqrt(_one_minus_prod(e, c)) - 1.0


def _xi_prime(e: float, c: float) -> float:
    k = 1.0 / (1.0 + c)
    one_m = _one_minus_prod(e, c)
    s1 = _sqrt_term(e, c)
    return -k * k * s1 / e + 0.5 * k / (one_m * math.sqrt(one_m))


def xi_inverse(p: Params, x: float, rtol: float = 1e-12) -> float:
    """Unique ``c`` in ``(0, 1/eps)`` with ``xi(c) = x``.

    Bracketed bisection on ``(delta, 1/eps - delta)`` followed by three
    Newton steps; ``xi`` is strictly increasing so the bracket never fails.
    """
    e = p.eps
    if not x > 0.0:
        raise OutOfDomain(f"xi_inverse needs x > 0, got {x!r}")
    cmax = 1.0 / e
    lo = 1e-14 * cmax
    hi = cmax * (1.0 - 1e-14)
    # xi(c) ~ c/2 near zero; extend the bracket downward for tiny x
    while lo > 0.0 and xi(p, lo) > x:
        lo *= 1e-4
    while hi > lo and xi(p, hi) < x:
        hi = cmax - 0.5 * (cmax - hi)
        if hi >= cmax:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if xi(p, mid) < x:
            lo = mid
        else:
            hi = mid
        # near 1/eps the map is steep; resolve c to the last bit there
        if hi - lo <= 0.25 * rtol * mid and e * mid < 0.5:
            break
    c = 0.5 * (lo + hi)
    r = abs(xi(p, c) - x)
    for _ in range(3):
        c_new = c - (xi(p, c) - x) / _xi_prime(e, c)
        if not (0.0 < c_new < cmax) or _one_minus_prod(e, c_new) <= 0.0:
            break
        r_new = abs(xi(p, c_new) - x)
        if r_new >= r:
            break
        c, r = c_new, r_new
    return c


# --------------------------------------------------------------------------
# concavity: y'' = p(x,y) h(x,y)
# --------------------------------------------------------------------------

def inflection_polynomial(p: Params, x, y):
    """Cubic ``eps^2 y^3 - 3 eps x y^2 + (2x^2 - eps x^2 - x) y + x^3``.

    Its zero set in ``y`` is where solutions of the scalar equation inflect.
    Works on numpy arrays.
    """
    e = p.eps
    return ((e * e * y - 3.0 * e * x) * y + (2.0 * x * x - e * x * x - x)) * y + x ** 3


def h_aux(p: Params, pt) -> float:
    """Concavity function ``h = x^2 f + y (eps y - 2x)``.

    ``sign(y'') = sign(h)`` off the vertical isocline.  Evaluated through the
    equivalent form ``cubic / (eps y - x)``, which avoids the cancellation of
    the two-term sum.
    """
    x, y = pt
    e = p.eps
    _slope_denominator(e, x, y)
    return inflection_polynomial(p, x, y) / (e * y - x)


def p_aux(p: Params, pt) -> float:
    x, y = pt
    _slope_denominator(p.eps, x, y)
    d = p.eps * y - x
    return 1.0 / (x * x * d * d)


def h_aux_array(p: Params, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised :func:`h_aux`; points on V give ``nan``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = p.eps * y - x
    with np.errstate(divide="ignore", invalid="ignore"):
        out = inflection_polynomial(p, x, y) / d
    return np.where((d == 0.0) | (x == 0.0), np.nan, out)


# --------------------------------------------------------------------------
# inflection curve
# --------------------------------------------------------------------------

def _cubic_coeffs(e: float, x: float) -> tuple[float, float, float, float]:
    return e * e, -3.0 * e * x, 2.0 * x * x - e * x * x - x, x ** 3


def _polish(coeffs, r: float) -> float:
    a, b, c, d = coeffs
    val = ((a * r + b) * r + c) * r + d
    der = (3.0 * a * r + 2.0 * b) * r + c
    if der != 0.0:
        r -= val / der
    return r


def inflection_cubic_roots(p: Params, x: float, rel_tol: float = 1e-12) -> list[float]:
    """All real roots of the inflection cubic at abscissa ``x``, ascending.

    For ``x > 0`` there are three: one negative, one between ``H`` and
    ``alpha`` (the inflection curve) and one above ``V``.  Closed-form
    trigonometric solution, one Newton polish per root.
    """
    if not x > 0.0:
        raise OutOfDomain(f"inflection cubic needs x > 0, got {x!r}")
    coeffs = _cubic_coeffs(p.eps, x)
    a3, b3, c3, d3 = coeffs
    a, b, c = b3 / a3, c3 / a3, d3 / a3
    pp = b - a * a / 3.0
    qq = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = 4.0 * pp ** 3 + 27.0 * qq * qq
    scale = 4.0 * abs(pp) ** 3 + 27.0 * qq * qq
    if abs(disc) <= rel_tol * scale:
        raise DegenerateRoots(f"inflection cubic has a repeated root near x = {x!r}")
    shift = -a / 3.0
    if disc < 0.0:
        m = 2.0 * math.sqrt(-pp / 3.0)
        arg = 3.0 * qq / (pp * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    else:
        sq = math.sqrt(disc / 108.0)
        u = -qq / 2.0 + sq
        v = -qq / 2.0 - sq
        roots = [math.copysign(abs(u) ** (1 / 3), u) + math.copysign(abs(v) ** (1 / 3), v) + shift]
    return sorted(_polish(coeffs, r) for r in roots)


def inflection_curve(p: Params, x: float, method: str = "xi") -> float:
    """Curve of inflection points lying between ``H`` and the slow manifold.

    ``method="xi"`` evaluates ``F(x, xi^{-1}(x))``; ``method="cubic"`` takes the
    middle root of the inflection cubic, which is several times cheaper and
    is what the integrators' event functions use.
    """
    if not x > 0.0:
        raise OutOfDomain(f"inflection curve needs x > 0, got {x!r}")
    if method == "xi":
        return isocline_F(p, x, xi_inverse(p, x))
    if method == "cubic":
        return inflection_cubic_roots(p, x)[1]
    raise ValueError(f"unknown method {method!r}")


def inflection_curve_slope(p: Params, x: float, y: float | None = None) -> float:
    """``dY/dx`` by implicit differentiation of the inflection cubic."""
    if y is None:
        y = inflection_curve(p, x, method="cubic")
    e = p.eps
    p_x = -3.0 * e * y * y + (4.0 * x - 2.0 * e * x - 1.0) * y + 3.0 * x * x
    p_y = 3.0 * e * e * y * y - 6.0 * e * x * y + (2.0 - e) * x * x - x
    return -p_x / p_y


def inflection_curve_array(p: Params, x: np.ndarray) -> np.ndarray:
    """Vectorised middle root of the inflection cubic (``x > 0``)."""
    x = np.asarray(x, dtype=float)
    e = p.eps
    a3, b3, c3, d3 = e * e, -3.0 * e * x, (2.0 - e) * x * x - x, x ** 3
    a, b, c = b3 / a3, c3 / a3, d3 / a3
    pp = b - a * a / 3.0
    qq = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    m = 2.0 * np.sqrt(-pp / 3.0)
    theta = np.arccos(np.clip(3.0 * qq / (pp * m), -1.0, 1.0)) / 3.0
    # k = 1 of the trigonometric family is the middle root
    r = m * np.cos(theta - 2.0 * np.pi / 3.0) - a / 3.0
    for _ in range(2):
        val = ((a3 * r + b3) * r + c3) * r + d3
        der = (3.0 * a3 * r + 2.0 * b3) * r + c3
        r = r - val / der
    return r


# --------------------------------------------------------------------------
# slow tangent eigenstructure
# --------------------------------------------------------------------------

def jacobian(p: Params, pt) -> tuple[tuple[float, float], tuple[float, float]]:
    x, y = pt
    e = p.eps
    return ((-2.0 * x + e * y, e * x), (2.0 * x - e * y, -e * x - 1.0))


def slow_tangent(p: Params, pt) -> TangentData:
    """Trace, determinant, eigenvalues and eigenvector slopes of the Jacobian.

    Eigenvectors are ``(1, sigma)`` with ``sigma = (lambda - g11)/g12``.
    """
    x, y = pt
    if not x > 0.0:
        raise OutOfDomain(f"slow_tangent needs x > 0, got {x!r}")
    e = p.eps
    g11 = -2.0 * x + e * y
    g12 = e * x
    trace = -(e + 2.0) * x + e * y - 1.0
    det = 2.0 * x - e * y
    # tau^2 - 4 Delta rewritten as a sum of squares
    w = y - ((e + 2.0) * x - 1.0) / e
    disc = e * e * w * w + 4.0 * e * x
    root = math.sqrt(disc)
    if trace <= 0.0:
        lam_minus = 0.5 * (trace - root)
        lam_plus = det / lam_minus
    else:
        lam_plus = 0.5 * (trace + root)
        lam_minus = det / lam_plus
    return TangentData(
        trace=trace,
        det=det,
        lambda_plus=lam_plus,
        lambda_minus=lam_minus,
        sigma_plus=(lam_plus - g11) / g12,
        sigma_minus=(lam_minus - g11) / g12,
    )


# --------------------------------------------------------------------------
# region labelling
# --------------------------------------------------------------------------

def classify_region(p: Params, pt, tol: float = 1e-9) -> RegionLabel:
    """Locate ``pt`` relative to the ordered curves ``H < Y < alpha < V``."""
    x, y = pt
    if not x > 0.0:
        raise OutOfDomain("region labels need x > 0")
    bounds = (
        (H(p, x), RegionLabel.OnH, RegionLabel.BelowH),
        (inflection_curve(p, x, method="cubic"), RegionLabel.OnY, RegionLabel.BetweenHAndY),
        (alpha(p, x), RegionLabel.OnAlpha, RegionLabel.BetweenYAndAlpha),
        (V(p, x), RegionLabel.OnV, RegionLabel.BetweenAlphaAndV),
    )
    for value, on, below in bounds:
        if abs(y - value) <= tol:
            return on
        if y < value:
            return below
    return RegionLabel.AboveV


# --------------------------------------------------------------------------
# units
# --------------------------------------------------------------------------

def nondimensionalize(k1: float, km1: float, k2: float, a0: float, b0: float) -> NondimResult:
    """Map rate constants and concentrations to ``(eps, x0, y0)``.

    ``t = k2 * tau``, ``x = (k1/k2) a``, ``y = (k1/k2) b`` and
    ``eps = km1/k1``; the returned ``time_scale`` is ``k2``.
    """
    for name, val in (("k1", k1), ("km1", km1), ("k2", k2)):
        if not (math.isfinite(val) and val > 0.0):
            raise NonpositiveRate(f"{name} must be positive, got {val!r}")
    for name, val in (("a0", a0), ("b0", b0)):
        if not (math.isfinite(val) and val >= 0.0):
            raise OutOfDomain(f"{name} must be nonnegative, got {val!r}")
    scale = k1 / k2
    return NondimResult(Params(km1 / k1), PhasePoint(scale * a0, scale * b0), float(k2))
