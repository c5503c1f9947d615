"""Power-series expansions of the slow manifold and long-time asymptotics.

Two expansions of solutions of ``eps x y y' - x^2 y' - x^2 + y + eps x y = 0``:

* at the origin, ``y ~ sum_{n>=2} b_n x^n`` (zero radius of convergence);
* at infinity, ``M(x) ~ sum_{n>=-1} rho_n x^{-n}``.

Both are evaluated with optimal truncation.  The module also carries a real
principal-branch Lambert W and the comparison solution built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Sequence

from .core import Params, _eps_of
from .errors import OutOfDomain


class AsymptoticEstimate(NamedTuple):
    value: float
    truncation_index: int
    last_term_magnitude: float


@dataclass(frozen=True)
class OriginSeries:
    """Coefficients ``b_2 .. b_N`` of the expansion at the origin."""

    eps: float
    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs) + 1

    def b(self, n: int):
        if n < 2:
            return 0
        return self.coeffs[n - 2]


@dataclass(frozen=True)
class InfinitySeries:
    """Coefficients ``rho_{-1} .. rho_N`` of the expansion at infinity."""

    eps: float
    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs) - 2

    def rho(self, n: int):
        return self.coeffs[n + 1]


def _exact_eps(p) -> Fraction:
    e = p.eps if isinstance(p, Params) else p
    if isinstance(e, Rational):
        return Fraction(e)
    return Fraction(float(e))


# --------------------------------------------------------------------------
# coefficient recurrences
# --------------------------------------------------------------------------

def origin_coeffs(p, order: int, exact: bool = False) -> OriginSeries:
    """Origin coefficients from the recurrence

        b_2 = 1,  b_3 = 2 - eps,
        b_n = (n - 1 - eps) b_{n-1} - eps sum_{m=2}^{n-2} (n - m) b_m b_{n-m}.

    With ``exact=True`` the arithmetic is done in :class:`fractions.Fraction`
    (``p`` may then be a Fraction, or a float that is converted exactly).
    """
    if order < 2:
        raise ValueError(f"origin series order must be >= 2, got {order}")
    e = _exact_eps(p) if exact else _eps_of(p)
    one = Fraction(1) if exact else 1.0
    b = {2: one}
    if order >= 3:
        b[3] = 2 - e
    for n in range(4, order + 1):
        conv = sum(((n - m) * b[m] * b[n - m] for m in range(2, n - 1)), 0 * one)
        b[n] = (n - 1 - e) * b[n - 1] - e * conv
    return OriginSeries(float(e) if not exact else e, tuple(b[n] for n in range(2, order + 1)))


def infinity_coeffs(p, order: int, exact: bool = False) -> InfinitySeries:
    """Coefficients at infinity:

        rho_{-1} = 1/eps,  rho_0 = -1/(eps (1 + eps)),
        rho_n = -[rho_{n-1} - eps sum_{m=1}^{n} (n - m) rho_{m-1} rho_{n-m}] / (1 + eps).
    """
    if order < -1:
        raise ValueError(f"infinity series order must be >= -1, got {order}")
    e = _exact_eps(p) if exact else _eps_of(p)
    one = Fraction(1) if exact else 1.0
    rho = {-1: one / e}
    if order >= 0:
        rho[0] = -one / (e * (1 + e))
    for n in range(1, order + 1):
        conv = sum(((n - m) * rho[m - 1] * rho[n - m] for m in range(1, n)), 0 * one)
        rho[n] = -(rho[n - 1] - e * conv) / (1 + e)
    return InfinitySeries(float(e) if not exact else e, tuple(rho[n] for n in range(-1, order + 1)))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _truncated_sum(terms: Sequence[tuple[int, float]]) -> AsymptoticEstimate:
    """Add terms until the first one whose magnitude exceeds its predecessor.

    Exactly-zero coefficients are skipped in the comparison: they neither stop
    the sum nor reset the reference magnitude.
    """
    total = 0.0
    last_idx, last_mag = terms[0][0], abs(terms[0][1])
    prev = None
    parts = []
    for idx, term in terms:
        mag = abs(term)
        if prev is not None and term != 0.0 and mag > prev:
            break
        parts.append(term)
        last_idx = idx
        if term != 0.0 or prev is None:
            last_mag = mag
        if term != 0.0:
            prev = mag
    total = math.fsum(parts)
    return AsymptoticEstimate(total, last_idx, last_mag)


def origin_eval(s: OriginSeries, x: float) -> AsymptoticEstimate:
    """Optimally truncated partial sum of the origin series at ``x > 0``."""
    if not x > 0.0:
        raise OutOfDomain(f"origin series needs x > 0, got {x!r}")
    terms = [(n, float(b) * x ** n) for n, b in enumerate(s.coeffs, start=2)]
    return _truncated_sum(terms)


def infinity_eval(s: InfinitySeries, x: float) -> AsymptoticEstimate:
    """Optimally truncated partial sum of the series in ``1/x``.

    The leading ``rho_{-1} x`` and constant terms always enter; truncation
    acts on ``n >= 1``.
    """
    if not x > 0.0:
        raise OutOfDomain(f"infinity series needs x > 0, got {x!r}")
    head = [float(r) * x ** (-n) for n, r in enumerate(s.coeffs[:2], start=-1)]
    tail = [(n, float(r) * x ** (-n)) for n, r in enumerate(s.coeffs[2:], start=1)]
    if not tail:
        n_last = len(s.coeffs) - 2
        return AsymptoticEstimate(math.fsum(head), n_last, abs(head[-1]))
    est = _truncated_sum(tail)
    return AsymptoticEstimate(math.fsum(head) + est.value, est.truncation_index, est.last_term_magnitude)


def ode_residual(eps, x, y, dy):
    """Residual ``eps x y y' - x^2 y' - x^2 + y + eps x y`` of the scalar ODE.

    Works unchanged on Fractions, which is how the series tests evaluate it
    without cancellation.
    """
    return eps * x * y * dy - x * x * dy - x * x + y + eps * x * y


def origin_residual(s: OriginSeries, x) -> Fraction:
    """Exact ODE residual of the full (untruncated) polynomial ``sum b_n x^n``."""
    xf = Fraction(x)
    e = Fraction(s.eps)
    y = sum(Fraction(b) * xf ** n for n, b in enumerate(s.coeffs, start=2))
    dy = sum(n * Fraction(b) * xf ** (n - 1) for n, b in enumerate(s.coeffs, start=2))
    return ode_residual(e, xf, y, dy)


def infinity_residual(s: InfinitySeries, x) -> Fraction:
    """Exact ODE residual of ``sum rho_n x^{-n}`` with all stored terms."""
    xf = Fraction(x)
    e = Fraction(s.eps)
    y = sum(Fraction(r) * xf ** (-n) for n, r in enumerate(s.coeffs, start=-1))
    dy = sum(-n * Fraction(r) * xf ** (-n - 1) for n, r in enumerate(s.coeffs, start=-1))
    return ode_residual(e, xf, y, dy)


# --------------------------------------------------------------------------
# Lambert W
# --------------------------------------------------------------------------

_INV_E = math.exp(-1.0)


def lambert_w(z: float) -> float:
    """Principal branch of Lambert W for real ``z >= -1/e``.

    Series seed near the origin, ``ln z - ln ln z`` seed for large ``z``,
    then Halley iterations.
    """
    z = float(z)
    if z < -_INV_E:
        if z > -_INV_E - 1e-15:
            return -1.0
        raise OutOfDomain(f"W(z) is not real for z < -1/e, got {z!r}")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    if z < -0.25:
        # branch point expansion in sqrt(2(1 + e z))
        q = math.sqrt(max(0.0, 2.0 * (1.0 + math.e * z)))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q ** 3
    elif z < math.e:
        w = z * (1.0 - z + 1.5 * z * z) if abs(z) < 0.1 else math.log1p(z) * 0.8
    else:
        lz = math.log(z)
        w = lz - math.log(lz)
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4.0 * 2.220446049250313e-16 * (1.0 + abs(w)):
            break
    return w


def lambert_w_exp(s: float) -> float:
    """``W(exp(s))`` computed without forming ``exp(s)``.

    Solves ``w + ln w = s`` by Newton iteration, so it is valid for ``s``
    far beyond the overflow threshold of ``exp``.
    """
    s = float(s)
    if s < 700.0:
        w = lambert_w(math.exp(s))
        if w == 0.0:
            return w
    else:
        w = s - math.log(s)
    for _ in range(60):
        g = w + math.log(w) - s
        dw = g / (1.0 + 1.0 / w)
        w_new = w - dw
        if w_new <= 0.0:
            w_new = 0.5 * w
        if abs(w_new - w) <= 2.220446049250313e-16 * w:
            w = w_new
            break
        w = w_new
    return w


def phi_comparison(t: float, a: float, t0: float, u0: float) -> float:
    """Solution of ``u' = -u^2/(1 + a u)``, ``u(t0) = u0``:

        u(t) = 1 / (a W(exp(ln(1/(a u0)) + 1/(a u0) + (t - t0)/a)))
    """
    if not (a > 0.0 and u0 > 0.0 and t0 >= 0.0):
        raise OutOfDomain("phi needs a > 0, u0 > 0, t0 >= 0")
    if t < t0:
        raise OutOfDomain(f"phi needs t >= t0, got t={t!r} < t0={t0!r}")
    inv = 1.0 / (a * u0)
    log_arg = math.log(inv) + inv + (t - t0) / a
    return 1.0 / (a * lambert_w_exp(log_arg))


def longtime_leading(p, t: float) -> tuple[float, float]:
    """Leading long-time behaviour of every planar solution with ``x0 > 0``:

        x ~ 1/t + eps ln t / t^2,   y ~ 1/t^2 + 2 eps ln t / t^3.

    ``p`` may be a :class:`Params` or a bare float (``eps = 0`` allowed).
    """
    if not t > 1.0:
        raise OutOfDomain(f"longtime_leading needs t > 1, got {t!r}")
    e = _eps_of(p)
    lt = math.log(t)
    return 1.0 / t + e * lt / (t * t), 1.0 / (t * t) + 2.0 * e * lt / t ** 3
