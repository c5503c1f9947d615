"""Numerical slow manifold with two-sided brackets.

The slow manifold ``M`` is the unique scalar solution that stays between the
horizontal isocline and ``alpha`` for every ``x > 0``.  It is computed two
ways:

* backward sweep - integrate the scalar equation from far out toward the
  origin; the antifunnel contracts every other solution at rate ``eps**2``;
* shooting bisection - classify a trial ``y`` at fixed ``x0`` by integrating
  forward until the solution leaves through ``H`` (below ``M``) or ``alpha``
  (above ``M``).

:class:`SlowManifold` blends a backward table with the origin and infinity
series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import core
from .core import Params
from .errors import BracketViolation, OutOfDomain, SeamMismatch, Undecided
from .integrate import IntegratorConfig, Status, integrate_scalar
from .series import (
    InfinitySeries,
    OriginSeries,
    infinity_coeffs,
    infinity_eval,
    origin_coeffs,
    origin_eval,
)

DEFAULT_GRID = np.logspace(-2, 2, 200)
# the gap M - Y falls to ~1e-13 at large x for eps ~ 10
TABLE_CONFIG = IntegratorConfig(rtol=1e-13, atol=1e-16)
SHOOTING_CONFIG = IntegratorConfig(rtol=1e-11, atol=1e-14)


@dataclass(frozen=True)
class SlowManifoldTable:
    eps: float
    grid: np.ndarray
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    method: str
    est_error: np.ndarray
    clipped: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.size == 0 or np.any(np.diff(g) <= 0.0):
            raise ValueError("table grid must be nonempty and strictly increasing")

    def __len__(self) -> int:
        return len(self.grid)

    def rows(self):
        for i in range(len(self.grid)):
            yield (float(self.grid[i]), float(self.values[i]), float(self.lower[i]),
                   float(self.upper[i]), float(self.est_error[i]), self.method)


def bracket(p: Params, x: float) -> tuple[float, float]:
    """``(Y(x), alpha(x))``, an interval guaranteed to contain ``M(x)``."""
    if not x > 0.0:
        raise OutOfDomain(f"bracket needs x > 0, got {x!r}")
    return core.inflection_curve(p, x), core.alpha(p, x)


def backward_start(p: Params, x_max: float) -> float:
    return x_max + max(10.0, 40.0 / p.eps ** 2)


def compute_backward(
    p: Params,
    grid: Sequence[float],
    cfg: IntegratorConfig = TABLE_CONFIG,
    *,
    start_fraction: float = 0.5,
) -> SlowManifoldTable:
    """Backward sweep of the scalar equation onto ``grid``.

    Starts at ``X_s = max(grid) + max(10, 40/eps^2)`` at the point
    ``H + start_fraction*(alpha - H)``.  The error estimate at ``x`` is the
    initial bracket width contracted by ``exp(-eps^2 (X_s - x))`` plus
    ``10*rtol``.
    """
    grid = np.asarray(sorted(float(v) for v in grid), dtype=float)
    if grid.size == 0 or grid[0] <= 0.0:
        raise OutOfDomain("grid must be nonempty with all x > 0")
    e = p.eps
    xs = backward_start(p, grid[-1])
    h_s, a_s = core.H(p, xs), core.alpha(p, xs)
    y_s = h_s + start_fraction * (a_s - h_s)
    curve = integrate_scalar(p, xs, y_s, grid[0], cfg, x_eval=grid, x_min=min(1e-6, grid[0]))
    if curve.status not in (Status.Completed,):
        raise BracketViolation(f"backward sweep stopped early: {curve.status.value}")
    lookup = dict(zip(curve.x.tolist(), curve.y.tolist()))
    raw = np.array([lookup[v] for v in grid.tolist()])
    lower = np.array([core.inflection_curve(p, v) for v in grid])
    upper = core.alpha(p, grid)
    est = (a_s - h_s) * np.exp(-e * e * (xs - grid)) + 10.0 * cfg.rtol
    below = lower - raw
    above = raw - upper
    if np.any(below > est) or np.any(above > est):
        i = int(np.argmax(np.maximum(below, above)))
        raise BracketViolation(f"backward value at x={grid[i]!r} leaves its bracket")
    clipped = (raw <= lower) | (raw >= upper)
    values = np.clip(raw, lower, upper)
    return SlowManifoldTable(e, grid, values, lower, upper, "Backward", est, clipped)


def _classify(p: Params, x0: float, y0: float, span: float, cfg: IntegratorConfig) -> Optional[int]:
    """-1 if the solution through (x0, y0) exits through H, +1 through alpha,
    None if it is still inside after ``span``."""
    if y0 <= core.H(p, x0):
        return -1
    if y0 >= core.alpha(p, x0):
        return 1
    events = (
        ("H", lambda x, s: s[0] - core.H(p, x)),
        ("alpha", lambda x, s: s[0] - core.alpha(p, x)),
    )
    curve = integrate_scalar(p, x0, y0, x0 + span, cfg, events=events, terminal=("H", "alpha"))
    for _, key, _ in curve.events:
        return -1 if key == "H" else 1
    return None


def compute_bisection(
    p: Params,
    x0: float,
    tol: float = 1e-10,
    cfg: IntegratorConfig = SHOOTING_CONFIG,
    *,
    span: Optional[float] = None,
    max_doublings: int = 6,
) -> float:
    """Shooting bisection for ``M(x0)`` inside ``[Y(x0), alpha(x0)]``.

    Raises
    ------
    Undecided
        When a trial point neither exits through ``H`` nor through ``alpha``
        even after ``max_doublings`` span doublings while the interval is
        still wider than ``100*tol``.
    """
    if not (x0 > 0.0 and tol > 0.0):
        raise OutOfDomain("compute_bisection needs x0 > 0 and tol > 0")
    lo, hi = bracket(p, x0)
    base_span = span if span is not None else max(5.0, 10.0 / p.eps)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        verdict = None
        s = base_span
        for _ in range(max_doublings + 1):
            verdict = _classify(p, x0, mid, s, cfg)
            if verdict is not None:
                break
            s *= 2.0
        if verdict is None:
            if hi - lo <= 100.0 * tol:
                break
            raise Undecided(f"no exit within span {s / 2!r} at x0={x0!r}, y={mid!r}")
        if verdict < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# blended evaluation
# --------------------------------------------------------------------------

def _logit(theta):
    return np.log(theta) - np.log1p(-theta)


def _expit(v: float) -> float:
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    ev = math.exp(v)
    return ev / (1.0 + ev)


class SlowManifold:
    """Piecewise evaluator of ``M``.

    Below ``x_lo`` the origin series is used and above ``x_hi`` the series
    at infinity.  In between, the table is interpolated by a cubic Hermite
    polynomial in ``log x`` whose node slopes come from the equation itself,
    ``dM/dlog x = x f(x, M)``.  Where the bracket is only a few ulps wide
    this can land on or outside it; there the value is replaced by a
    monotone (PCHIP) interpolant of the relative position
    ``theta = (M - Y)/(alpha - Y)`` in logit space, which maps back into
    ``(0, 1)`` and so cannot leave the bracket.
    """

    def __init__(
        self,
        p: Params,
        table: SlowManifoldTable,
        origin: OriginSeries,
        infinity: InfinitySeries,
        *,
        x_lo: float = 1e-2,
        x_hi: float = 1e2,
        seam_tol: float = 1e-6,
    ):
        if not (table.grid[0] <= x_lo < x_hi <= table.grid[-1]):
            raise ValueError("table must cover [x_lo, x_hi]")
        self.p = p
        self.table = table
        self.origin = origin
        self.infinity = infinity
        self.x_lo = x_lo
        self.x_hi = x_hi
        gx = np.asarray(table.grid, dtype=float)
        gy = np.asarray(table.values, dtype=float)
        lo = np.asarray(table.lower, dtype=float)
        width = np.asarray(table.upper, dtype=float) - lo
        theta = np.clip((gy - lo) / width, 1e-300, 1.0 - 1e-16)
        self._x = gx
        self._m = gy
        self._dm = np.array([core.scalar_slope(p, (a, b)) for a, b in zip(gx, gy)])
        self._logit_theta = PchipInterpolator(np.log(gx), _logit(theta), extrapolate=False)
        self.seam_mismatch = (
            abs(origin_eval(origin, x_lo).value - self._interp(x_lo)),
            abs(infinity_eval(infinity, x_hi).value - self._interp(x_hi)),
        )
        if max(self.seam_mismatch) > seam_tol:
            raise SeamMismatch(f"series and table disagree at the seams: {self.seam_mismatch}")

    @classmethod
    def build(
        cls,
        p: Params,
        grid: Optional[Sequence[float]] = None,
        cfg: IntegratorConfig = TABLE_CONFIG,
        *,
        origin_order: int = 30,
        infinity_order: int = 30,
        **kwargs,
    ) -> "SlowManifold":
        table = compute_backward(p, DEFAULT_GRID if grid is None else grid, cfg)
        return cls(p, table, origin_coeffs(p, origin_order), infinity_coeffs(p, infinity_order),
                   **kwargs)

    def _hermite(self, x):
        gx = self._x
        i = np.clip(np.searchsorted(gx, x, side="right") - 1, 0, len(gx) - 2)
        h = gx[i + 1] - gx[i]
        t = (x - gx[i]) / h
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * self._m[i] + (t3 - 2 * t2 + t) * h * self._dm[i]
                + (-2 * t3 + 3 * t2) * self._m[i + 1] + (t3 - t2) * h * self._dm[i + 1])

    def _interp(self, x: float) -> float:
        val = float(self._hermite(x))
        lo = core.inflection_curve(self.p, x, method="cubic")
        hi = core.alpha(self.p, x)
        if lo < val < hi:
            return val
        return lo + _expit(float(self._logit_theta(math.log(x)))) * (hi - lo)

    def __call__(self, x: float) -> float:
        if not x > 0.0:
            raise OutOfDomain(f"slow manifold needs x > 0, got {x!r}")
        if x < self.x_lo:
            return origin_eval(self.origin, x).value
        if x > self.x_hi:
            return infinity_eval(self.infinity, x).value
        return self._interp(x)

    def values(self, xs) -> np.ndarray:
        """Evaluate on an array of abscissae."""
        xs = np.asarray(xs, dtype=float)
        if np.any(~(xs > 0.0)):
            raise OutOfDomain("slow manifold needs x > 0")
        out = np.empty_like(xs)
        mid = (xs >= self.x_lo) & (xs <= self.x_hi)
        out[mid] = [self._interp(float(x)) for x in xs[mid]]
        for i in np.flatnonzero(~mid):
            out[i] = self(float(xs[i]))
        return out


def evaluate(p: Params, x: float, table: SlowManifoldTable, origin: OriginSeries,
             infinity: InfinitySeries) -> float:
    """One-shot blended evaluation; build a :class:`SlowManifold` for repeated use."""
    return SlowManifold(p, table, origin, infinity)(x)
