"""Adaptive Dormand-Prince 5(4) integration of the planar and scalar systems.

The stepper is written for small state vectors held as Python tuples; for a
2-dimensional system that is considerably faster than numpy arrays.  Step
size is chosen by a proportional-integral controller (Hairer's DOPRI5
constants).  Curve crossings are located by bisecting on the length of a
single re-taken step, so every reported event point is itself an RK5 value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import core
from .core import Params, PhasePoint
from .errors import DenominatorZero, OutOfDomain, SingularityApproached

# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)

# PI controller constants
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0


class Status(enum.Enum):
    Completed = "Completed"
    MaxSteps = "MaxSteps"
    Diverged = "Diverged"
    Singular = "Singular"
    Terminated = "Terminated"


class EventKind(enum.Enum):
    CrossH = "CrossH"
    CrossAlpha = "CrossAlpha"
    CrossV = "CrossV"
    CrossY = "CrossY"
    ReachTarget = "ReachTarget"


class Direction(enum.Enum):
    Forward = "Forward"
    Backward = "Backward"


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step budget.

    ``h_max=None`` means one tenth of the integration range.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: Optional[float] = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.h_init > 0:
            raise ValueError("h_init must be positive")
        if self.h_max is not None and self.h_max < self.h_init:
            raise ValueError("h_max must be >= h_init")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    def resolved_h_max(self, span: float) -> float:
        return self.h_max if self.h_max is not None else max(abs(span) / 10.0, self.h_init)


class Event(NamedTuple):
    t: float
    kind: EventKind
    point: PhasePoint


@dataclass(frozen=True)
class Trajectory:
    """Planar solution samples.  ``quad`` holds the running integral of the
    optional quadrature integrand at every kept sample."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    events: tuple
    status: Status
    warnings: tuple = ()
    quad: Optional[np.ndarray] = None
    n_steps: int = 0

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.y])

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(float(self.x[-1]), float(self.y[-1]))


@dataclass(frozen=True)
class ScalarCurve:
    x: np.ndarray
    y: np.ndarray
    direction: Direction
    status: Status
    n_steps: int = 0
    events: tuple = ()

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


# --------------------------------------------------------------------------
# the stepper
# --------------------------------------------------------------------------

def _dp_step(rhs, t, y, h, k1):
    """One Dormand-Prince step.  Returns (y_new, k7, err, stage_states)."""
    n = len(y)
    y2 = tuple(y[i] + h * _A21 * k1[i] for i in range(n))
    k2 = rhs(t + _C2 * h, y2)
    y3 = tuple(y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n))
    k3 = rhs(t + _C3 * h, y3)
    y4 = tuple(y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(n))
    k4 = rhs(t + _C4 * h, y4)
    y5 = tuple(y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
               for i in range(n))
    k5 = rhs(t + _C5 * h, y5)
    y6 = tuple(y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                           + _A65 * k5[i]) for i in range(n))
    k6 = rhs(t + h, y6)
    y_new = tuple(y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                              + _B6 * k6[i]) for i in range(n))
    k7 = rhs(t + h, y_new)
    err = tuple(h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i]
                     + _E7 * k7[i]) for i in range(n))
    return y_new, k7, err, (y, y3, y4, y5, y6)


def _quad_increment(quad, t, h, stages):
    y1, y3, y4, y5, y6 = stages
    return h * (_B1 * quad(t, y1) + _B3 * quad(t + _C3 * h, y3) + _B4 * quad(t + _C4 * h, y4)
                + _B5 * quad(t + _C5 * h, y5) + _B6 * quad(t + h, y6))


def _finite(y) -> bool:
    return all(math.isfinite(v) for v in y)


@dataclass
class _RawResult:
    t: list
    y: list
    quad: list
    events: list = field(default_factory=list)
    status: Status = Status.Completed
    warnings: list = field(default_factory=list)
    n_steps: int = 0


def solve(
    rhs: Callable,
    t0: float,
    y0: Sequence[float],
    t_end: float,
    cfg: IntegratorConfig,
    *,
    events: Sequence[tuple] = (),
    terminal: Iterable = (),
    t_eval: Sequence[float] = (),
    quad: Optional[Callable] = None,
    thin: Optional[float] = None,
    guard: Optional[Callable] = None,
    clamp_nonneg: bool = False,
) -> _RawResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end`` (either direction).

    Parameters
    ----------
    events
        ``(key, g)`` pairs; a sign change of ``g(t, y)`` over an accepted step
        is refined by bisection until ``|g| <= atol``.
    terminal
        Event keys that stop the integration at the refined crossing.
    t_eval
        Abscissae that must be hit exactly; they are always kept as samples.
    quad
        Integrand ``q(t, y)``; its integral is accumulated with the RK
        weights and reported at every kept sample.
    thin
        Keep a sample only once ``|t|`` has grown by this relative amount
        since the last kept one (log-spaced retention).
    guard
        ``guard(t, y) -> Status | None``; a non-None return stops the run.
    """
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    h_max = cfg.resolved_h_max(span)
    rtol, atol = cfg.rtol, cfg.atol
    terminal = set(terminal)
    targets = sorted((v for v in t_eval if direction * (v - t0) > 0 and direction * (t_end - v) >= 0),
                     key=lambda v: direction * v)
    target_idx = 0

    t = float(t0)
    y = tuple(float(v) for v in y0)
    out = _RawResult(t=[t], y=[y], quad=[0.0])
    acc = 0.0
    last_kept_t = t
    g_prev = [g(t, y) for _, g in events]

    try:
        k1 = rhs(t, y)
    except (DenominatorZero, ZeroDivisionError):
        out.status = Status.Singular
        return out
    h = min(cfg.h_init, h_max, span) if span > 0 else 0.0
    err_old = 1e-4
    steps = 0
    reject_streak = 0

    while direction * (t_end - t) > 0.0:
        if steps >= cfg.max_steps:
            out.status = Status.MaxSteps
            break
        stop_at = t_end
        if target_idx < len(targets):
            stop_at = targets[target_idx]
        remaining = abs(stop_at - t)
        landing = False
        if h >= remaining * (1.0 - 1e-12):
            h = remaining
            landing = True
        hs = direction * h
        try:
            y_new, k7, err, stages = _dp_step(rhs, t, y, hs, k1)
        except (DenominatorZero, ZeroDivisionError):
            h *= 0.25
            reject_streak += 1
            if reject_streak > 60 or h < 1e-14 * max(1.0, abs(t)):
                out.status = Status.Singular
                break
            continue
        steps += 1
        if not _finite(y_new) or not _finite(err):
            h *= 0.25
            reject_streak += 1
            if reject_streak > 60:
                out.status = Status.Diverged
                break
            continue
        s = 0.0
        for i in range(len(y)):
            sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
            s += (err[i] / sc) ** 2
        err_norm = math.sqrt(s / len(y))

        if err_norm > 1.0:
            fac = max(_FAC_MIN, _SAFETY / err_norm ** _EXPO) if err_norm < 1e300 else _FAC_MIN
            h = h * min(1.0, fac)
            reject_streak += 1
            if h < 1e-15 * max(1.0, abs(t)):
                out.status = Status.Diverged
                break
            continue
        reject_streak = 0

        t_new = stop_at if landing else t + hs
        if clamp_nonneg and any(v < 0.0 for v in y_new):
            if any(v < -10.0 * atol for v in y_new):
                out.warnings.append(f"clamped negative state {y_new} at t={t_new!r}")
            y_new = tuple(max(v, 0.0) for v in y_new)
            k7 = rhs(t_new, y_new)
        if quad is not None:
            acc += _quad_increment(quad, t, hs, stages)

        # event detection on the accepted step
        stop_event = None
        if events:
            g_new = [g(t_new, y_new) for _, g in events]
            found = []
            for j, (key, g) in enumerate(events):
                a, b = g_prev[j], g_new[j]
                if a != 0.0 and b != 0.0 and (a > 0.0) != (b > 0.0):
                    te, ye = _refine(rhs, g, t, y, hs, k1, a, atol)
                    found.append((direction * (te - t), key, te, ye))
                elif a != 0.0 and b == 0.0:
                    found.append((direction * (t_new - t), key, t_new, y_new))
                elif a == 0.0 and b != 0.0 and t == t0:
                    # started exactly on the curve and left it
                    found.append((0.0, key, t, y))
            found.sort(key=lambda item: item[0])
            for _, key, te, ye in found:
                out.events.append((te, key, ye))
                if key in terminal:
                    stop_event = (te, ye)
                    break
            g_prev = g_new
        if stop_event is not None:
            te, ye = stop_event
            if quad is not None:
                # integral up to the event point over the partial step
                acc -= _quad_increment(quad, t, hs, stages)
                _, _, _, st = _dp_step(rhs, t, y, te - t, k1)
                acc += _quad_increment(quad, t, te - t, st)
            out.t.append(te)
            out.y.append(ye)
            out.quad.append(acc)
            out.status = Status.Terminated
            out.n_steps = steps
            return out

        t, y, k1 = t_new, y_new, k7
        keep = thin is None or landing or abs(t) >= (1.0 + thin) * abs(last_kept_t)
        if keep:
            out.t.append(t)
            out.y.append(y)
            out.quad.append(acc)
            last_kept_t = t
        if landing and target_idx < len(targets) and t == targets[target_idx]:
            target_idx += 1

        if guard is not None:
            verdict = guard(t, y)
            if verdict is not None:
                out.status = verdict
                break

        # PI step-size update
        fac11 = err_norm ** _EXPO if err_norm > 0 else 0.0
        fac = fac11 / err_old ** _BETA
        fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFETY))
        h_next = abs(hs) / fac
        err_old = max(err_norm, 1e-4)
        h = min(h_next, h_max)

    if out.t[-1] != t:
        out.t.append(t)
        out.y.append(y)
        out.quad.append(acc)
    out.n_steps = steps
    return out


def _refine(rhs, g, t, y, hs, k1, g_start, atol):
    """Bisect the step length until the event function is within ``atol``."""
    lo, hi = 0.0, 1.0
    best = None
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        ym, _, _, _ = _dp_step(rhs, t, y, mid * hs, k1)
        gm = g(t + mid * hs, ym)
        best = (t + mid * hs, ym)
        if abs(gm) <= atol or hi - lo < 1e-15:
            break
        if (gm > 0.0) == (g_start > 0.0):
            lo = mid
        else:
            hi = mid
    return best


# --------------------------------------------------------------------------
# planar system
# --------------------------------------------------------------------------

def _curve(p: Params, kind: EventKind) -> Callable[[float], float]:
    if kind is EventKind.CrossH:
        return lambda x: core.H(p, x)
    if kind is EventKind.CrossAlpha:
        return lambda x: core.alpha(p, x)
    if kind is EventKind.CrossV:
        return lambda x: core.V(p, x)
    if kind is EventKind.CrossY:
        return lambda x: core.inflection_curve(p, x, method="cubic") if x > 0.0 else 0.0
    raise ValueError(f"{kind} is not a curve event")


def event_function(p: Params, kind: EventKind, pt, target: Optional[float] = None) -> float:
    """Signed distance proxy ``y - C(x)`` whose root marks a crossing of ``C``.

    For ``ReachTarget`` the value is ``x - target``.
    """
    x, y = pt
    if kind is EventKind.ReachTarget:
        if target is None:
            raise ValueError("ReachTarget needs a target abscissa")
        return x - target
    if kind is not EventKind.CrossV and not x > 0.0:
        raise OutOfDomain("curve events need x > 0")
    return y - _curve(p, kind)(x)


def planar_rhs(p: Params):
    e = p.eps

    def rhs(t, s):
        x, y = s
        return (-x * x + e * x * y, x * x - (1.0 + e * x) * y)

    return rhs


def integrate_planar(
    p: Params,
    init,
    t_max: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    watch: Iterable[EventKind] = (),
    *,
    quad: Optional[Callable] = None,
    thin: Optional[float] = None,
    t_eval: Sequence[float] = (),
) -> Trajectory:
    """Integrate the planar system from ``init`` over ``[0, t_max]``.

    ``watch`` selects curve crossings to record.  ``quad(t, (x, y))`` is an
    optional integrand accumulated along the run.  Times in ``t_eval`` are
    always hit exactly and kept.
    """
    x0, y0 = init
    if not (x0 >= 0.0 and y0 >= 0.0):
        raise OutOfDomain(f"initial point {init!r} is outside the quadrant")
    if not t_max > 0.0:
        raise OutOfDomain("t_max must be positive")
    evs = []
    for kind in watch:
        if kind is EventKind.ReachTarget:
            continue
        curve = _curve(p, kind)
        evs.append((kind, lambda t, s, c=curve: s[1] - c(s[0])))
    raw = solve(planar_rhs(p), 0.0, (x0, y0), t_max, cfg, events=evs, quad=quad, thin=thin,
                t_eval=t_eval, clamp_nonneg=True)
    arr = np.asarray(raw.y, dtype=float)
    events = tuple(Event(te, kind, PhasePoint(*ye)) for te, kind, ye in raw.events)
    if raw.status is Status.Completed and EventKind.ReachTarget in set(watch):
        events = events + (Event(raw.t[-1], EventKind.ReachTarget, PhasePoint(*raw.y[-1])),)
    return Trajectory(
        t=np.asarray(raw.t, dtype=float),
        x=arr[:, 0],
        y=arr[:, 1],
        events=events,
        status=raw.status,
        warnings=tuple(raw.warnings),
        quad=np.asarray(raw.quad, dtype=float) if quad is not None else None,
        n_steps=raw.n_steps,
    )


# --------------------------------------------------------------------------
# scalar equation
# --------------------------------------------------------------------------

def scalar_rhs(p: Params):
    e = p.eps

    def rhs(x, s):
        y = s[0]
        den = -x * x + e * x * y
        if den == 0.0:
            raise DenominatorZero("hit the vertical isocline")
        return ((x * x - (1.0 + e * x) * y) / den,)

    return rhs


def integrate_scalar(
    p: Params,
    x_from: float,
    y_from: float,
    x_to: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    x_eval: Sequence[float] = (),
    events: Sequence[tuple] = (),
    terminal: Iterable = (),
    x_min: float = 1e-6,
) -> ScalarCurve:
    """Integrate ``dy/dx = f(x, y)`` from ``x_from`` to ``x_to``.

    Stops early (status ``Singular``) when the solution gets within ``atol``
    of the vertical isocline, drops below ``y = 0``, or reaches ``x_min``.

    Raises
    ------
    SingularityApproached
        If the starting point is within ``atol`` of V.
    """
    if not (x_from > 0.0 and x_to > 0.0):
        raise OutOfDomain("scalar integration needs x > 0")
    e = p.eps
    if abs(-x_from * x_from + e * x_from * y_from) < cfg.atol:
        raise SingularityApproached(f"start ({x_from!r}, {y_from!r}) is on the vertical isocline")
    atol = cfg.atol
    side = math.copysign(1.0, -x_from * x_from + e * x_from * y_from)

    def guard(x, s):
        y = s[0]
        den = -x * x + e * x * y
        # a step may jump across V without ever landing within atol of it
        if y < 0.0 or abs(den) < atol or den * side < 0.0:
            return Status.Singular
        if x <= x_min and x_to < x_min:
            return Status.Singular
        return None

    x_stop = max(x_to, x_min) if x_to < x_from else x_to
    raw = solve(scalar_rhs(p), x_from, (y_from,), x_stop, cfg, t_eval=x_eval, events=events,
                terminal=terminal, guard=guard)
    ys = np.asarray([s[0] for s in raw.y], dtype=float)
    status = raw.status
    if status is Status.Completed and x_stop != x_to:
        status = Status.Singular
    return ScalarCurve(
        x=np.asarray(raw.t, dtype=float),
        y=ys,
        direction=Direction.Forward if x_to >= x_from else Direction.Backward,
        status=status,
        n_steps=raw.n_steps,
        events=tuple(raw.events),
    )
