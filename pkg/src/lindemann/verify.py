"""Numerical checks of the qualitative phase-plane results.

Every check returns a :class:`CheckReport`.  Sampling is driven by
``numpy.random.default_rng(seed)`` and per-sample work may run on a thread
pool; records are always kept in input order, so a report depends only on
its arguments and never on the number of workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import core
from .core import Params, PhasePoint
from .integrate import IntegratorConfig, Status, integrate_planar
from .manifold import SlowManifold

DEFAULT_SEED = 42
SUITES = ("concavity", "fences", "trapping", "attraction", "longtime", "table1")

# y ~ 1/t^2 reaches 1e-12 at t = 1e6, so the long run needs a tiny atol
LONGTIME_CONFIG = IntegratorConfig(rtol=1e-9, atol=1e-22)
LONGTIME_CHECKPOINTS = tuple(10.0 ** k for k in range(1, 7))


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check.  ``passed`` iff ``worst_violation <= tolerance``."""

    name: str
    passed: bool
    samples_tested: int
    worst_violation: float
    tolerance: float
    seed: Optional[int] = None
    details: tuple = ()
    params: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, name, records, worst, tolerance, seed=None, *, n_samples=None,
                     **params) -> "CheckReport":
        worst = float(worst)
        n = len(records) if n_samples is None else int(n_samples)
        return cls(name, bool(worst <= tolerance), n, worst, float(tolerance), seed,
                   tuple(records), dict(params))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "samples_tested": self.samples_tested,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "params": self.params,
            "details": list(self.details),
        }


class ConcavityVerdict(enum.Enum):
    ConcaveUp = "ConcaveUp"
    ConcaveDown = "ConcaveDown"
    Inflection = "Inflection"
    UndefinedOnV = "UndefinedOnV"


class FenceKind(enum.Enum):
    StrongLowerFence = "StrongLowerFence"
    StrongUpperFence = "StrongUpperFence"
    Neutral = "Neutral"


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _pt(pt) -> list:
    return [float(pt[0]), float(pt[1])]


# --------------------------------------------------------------------------
# pointwise classifiers
# --------------------------------------------------------------------------

def concavity_at(p: Params, pt, band: float = 1e-12) -> ConcavityVerdict:
    """Concavity of the scalar solution through ``pt`` from the sign of ``h``."""
    x, y = pt
    if not x > 0.0:
        raise core.OutOfDomain(f"concavity needs x > 0, got {x!r}")
    if abs(y - core.V(p, x)) <= band:
        return ConcavityVerdict.UndefinedOnV
    h = core.h_aux(p, (x, y))
    if abs(h) <= band:
        return ConcavityVerdict.Inflection
    return ConcavityVerdict.ConcaveUp if h > 0.0 else ConcavityVerdict.ConcaveDown


def fence_classify(p: Params, c: float, x: float, tol: float = 1e-12) -> FenceKind:
    """Compare the slope of the isocline ``F(., c)`` with the field value ``c``."""
    if not (0.0 < c < 1.0 / p.eps and x > 0.0):
        raise core.OutOfDomain(f"fence classification needs 0 < c < 1/eps and x > 0")
    d = core.isocline_F_prime(p, x, c) - c
    if abs(d) <= tol * (1.0 + c):
        return FenceKind.Neutral
    return FenceKind.StrongLowerFence if d < 0.0 else FenceKind.StrongUpperFence


def fence_switch(p: Params, c: float, tol: float = 1e-12, xtol: float = 1e-14) -> float:
    """Locate the lower-to-upper fence switch of ``F(., c)`` by bisection on
    :func:`fence_classify` alone."""
    lo, hi = 1e-12, 1.0
    while fence_classify(p, c, hi, tol) is FenceKind.StrongLowerFence:
        lo, hi = hi, 2.0 * hi
    while hi - lo > xtol * hi:
        mid = 0.5 * (lo + hi)
        kind = fence_classify(p, c, mid, tol)
        if kind is FenceKind.Neutral:
            return mid
        if kind is FenceKind.StrongLowerFence:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# concavity and tangency
# --------------------------------------------------------------------------

def concavity_suite(p: Params, n: int = 200, seed: int = DEFAULT_SEED) -> CheckReport:
    """``concavity_at`` against the band ordering, plus the slope bounds
    ``-1 < y' < 0`` between the axis and ``H``."""
    rng = np.random.default_rng(seed)
    xs = 10.0 ** rng.uniform(-2.0, 2.0, n)
    us = rng.uniform(0.01, 0.99, n)
    records = []
    bad = 0
    for x, u in zip(xs.tolist(), us.tolist()):
        h_ = core.H(p, x)
        y_ = core.inflection_curve(p, x, method="cubic")
        a_ = core.alpha(p, x)
        cases = (
            (u * h_, ConcavityVerdict.ConcaveDown),
            (h_ + u * (y_ - h_), ConcavityVerdict.ConcaveDown),
            (y_ + u * (a_ - y_), ConcavityVerdict.ConcaveUp),
        )
        for y, want in cases:
            got = concavity_at(p, (x, y))
            if got is not want:
                bad += 1
                records.append({"point": [x, y], "expected": want.value, "got": got.value})
        yb = u * h_
        slope = core.scalar_slope(p, (x, yb))
        if not -1.0 < slope < 0.0:
            bad += 1
            records.append({"point": [x, yb], "slope": slope})
    return CheckReport.from_samples("concavity", records, bad, 0, seed, n_samples=4 * n, eps=p.eps)


def tangency_check(p: Params, n_curve: int = 50, n_random: int = 1000,
                   seed: int = DEFAULT_SEED) -> CheckReport:
    """The field is parallel to the slow eigenvector on ``Y``, and
    ``tau^2 - 4 Delta >= 4 eps x`` across the quadrant.

    The violation is the normalized cross product ``|g x v|/(|g||v|)`` on the
    curve, and the relative shortfall of the discriminant bound elsewhere.
    """
    rng = np.random.default_rng(seed)
    records = []
    worst = 0.0
    for x in np.logspace(-1.0, 1.0, n_curve).tolist():
        y = core.inflection_curve(p, x)
        g1, g2 = core.vector_field(p, (x, y))
        sigma = core.slow_tangent(p, (x, y)).sigma_plus
        cross = abs(g1 * sigma - g2) / (math.hypot(g1, g2) * math.hypot(1.0, sigma))
        worst = max(worst, cross)
        records.append({"point": [x, y], "cross": cross})
    pts = rng.uniform(0.0, 10.0, (n_random, 2))
    for x, y in pts.tolist():
        e = p.eps
        tau = -(e + 2.0) * x + e * y - 1.0
        delta = 2.0 * x - e * y
        excess = tau * tau - 4.0 * delta - 4.0 * e * x
        scale = tau * tau + 4.0 * abs(delta) + 4.0 * e * x
        worst = max(worst, -excess / scale)
    return CheckReport.from_samples("tangency", records, worst, 1e-8, seed,
                                    n_samples=n_curve + n_random, eps=p.eps)


# --------------------------------------------------------------------------
# fences
# --------------------------------------------------------------------------

def fences_suite(p: Params, n_random: int = 20, seed: int = DEFAULT_SEED) -> CheckReport:
    """The classifier's switch point agrees with the closed form ``xi(c)``."""
    rng = np.random.default_rng(seed)
    cs = [f / p.eps for f in (0.2, 0.5, 0.8)] + (rng.uniform(0.05, 0.95, n_random) / p.eps).tolist()
    records = []
    worst = 0.0
    for c in cs:
        x_switch = fence_switch(p, c)
        ref = core.xi(p, c)
        err = abs(x_switch - ref)
        worst = max(worst, err)
        records.append({"c": c, "switch": x_switch, "xi": ref, "error": err})
    return CheckReport.from_samples("fences", records, worst, 1e-8, seed, eps=p.eps)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------

def random_inits(n: int, seed: int, scale: float = 10.0) -> list[PhasePoint]:
    """``n`` points uniform in ``(0, scale]^2``."""
    rng = np.random.default_rng(seed)
    u = scale * (1.0 - rng.random((n, 2)))
    return [PhasePoint(float(a), float(b)) for a, b in u]


def _regions(p: Params, x: np.ndarray):
    h_ = core.H(p, x)
    a_ = core.alpha(p, x)
    return (
        ("gamma0", h_, core.V(p, x)),
        ("gamma1", h_, a_),
        ("gamma2", core.inflection_curve_array(p, x), a_),
    )


def _trap_one(p: Params, init, t_max: float, cfg: IntegratorConfig) -> dict:
    tr = integrate_planar(p, init, t_max, cfg)
    rec = {"init": _pt(init), "status": tr.status.value}
    if tr.status is not Status.Completed:
        rec["violation"] = math.inf
        return rec
    x, y = tr.x, tr.y
    ok = x > 0.0
    t, x, y = tr.t[ok], x[ok], y[ok]
    worst = 0.0
    for name, lo, hi in _regions(p, x):
        inside = (y >= lo) & (y <= hi)
        if not inside.any():
            rec[name] = None
            worst = math.inf
            continue
        k = int(np.argmax(inside))
        rec[name] = float(t[k])
        excess = np.maximum(lo[k:] - y[k:], y[k:] - hi[k:]) / (1.0 + np.abs(hi[k:]))
        worst = max(worst, float(excess.max(initial=0.0)))
    entries = [rec[n] for n in ("gamma0", "gamma1", "gamma2")]
    if all(v is not None for v in entries) and not entries[0] <= entries[1] <= entries[2]:
        worst = math.inf
    rec["violation"] = worst
    return rec


def trapping_suite(
    p: Params,
    inits: Sequence,
    t_max: float = 100.0,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    threads: int = 1,
    seed: Optional[int] = None,
) -> CheckReport:
    """Entry into the nested trapping regions and no exit afterwards.

    Entry times are the first kept samples inside each region; they must be
    nondecreasing from the outer region inwards.  After entry, excursions
    (relative to ``1 + |boundary|``) must stay within ``10*atol``.
    """
    records = _map(lambda q: _trap_one(p, q, t_max, cfg), list(inits), threads)
    worst = max((r["violation"] for r in records), default=0.0)
    return CheckReport.from_samples("trapping", records, worst, 10.0 * cfg.atol, seed,
                                    eps=p.eps, t_max=t_max, rtol=cfg.rtol, atol=cfg.atol)


def _attract_one(p: Params, init, t_end: float, cfg: IntegratorConfig) -> dict:
    tr = integrate_planar(p, init, t_end, cfg, thin=1e-2)
    rec = {"init": _pt(init), "status": tr.status.value}
    if tr.status is not Status.Completed:
        rec["violation"] = math.inf
        return rec
    fx, fy = tr.final
    norm = math.hypot(fx, fy)
    envelope = 2.0 * (1.0 + p.eps) / t_end
    rec.update(final=[fx, fy], norm=norm, envelope=envelope, violation=max(0.0, norm - envelope))
    return rec


def attraction_suite(
    p: Params,
    inits: Sequence,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    t_end: float = 1e4,
    threads: int = 1,
    seed: Optional[int] = None,
) -> CheckReport:
    """``|(x, y)(t_end)| <= 2 (1 + eps)/t_end`` for every initial point."""
    records = _map(lambda q: _attract_one(p, q, t_end, cfg), list(inits), threads)
    worst = max((r["violation"] for r in records), default=0.0)
    return CheckReport.from_samples("attraction", records, worst, 0.0, seed,
                                    eps=p.eps, t_end=t_end, rtol=cfg.rtol, atol=cfg.atol)


def longtime_ratios(p: Params, t: float, x: float, y: float) -> tuple[float, float]:
    """``r_x = (x - 1/t) t^2/ln t`` and ``r_y = (y - 1/t^2) t^3/(2 eps ln t)``."""
    lt = math.log(t)
    return (x - 1.0 / t) * t * t / lt, (y - 1.0 / (t * t)) * t ** 3 / (2.0 * p.eps * lt)


def longtime_suite(
    p: Params,
    init=PhasePoint(1.0, 1.0),
    cfg: IntegratorConfig = LONGTIME_CONFIG,
    *,
    checkpoints: Sequence[float] = LONGTIME_CHECKPOINTS,
    rx_tol: float = 0.05,
    ry_tol: float = 0.10,
    residual_tol: float = 1e-3,
) -> CheckReport:
    """Long-time laws ``x ~ 1/t + eps ln t/t^2`` and ``y ~ 1/t^2 + 2 eps ln t/t^3``
    and the integral identity ``1/x - 1/x0 - t + eps int_0^t y/x ds = 0``.

    The ratio tests apply at the last checkpoint, the residual test at all of
    them.  The reported violation is the largest ratio of a deviation to its
    tolerance, so the check passes when it is at most 1.
    """
    x0, y0 = init
    if not x0 > 0.0:
        raise core.OutOfDomain("longtime suite needs x0 > 0")
    e = p.eps
    cps = sorted(float(c) for c in checkpoints)
    tr = integrate_planar(p, init, cps[-1], cfg, quad=lambda t, s: s[1] / s[0] if s[0] > 0 else 0.0,
                          thin=1e-3, t_eval=cps)
    if tr.status is not Status.Completed:
        return CheckReport.from_samples("longtime", [{"status": tr.status.value}], math.inf, 1.0,
                                        None, eps=e)
    index = {float(t): i for i, t in enumerate(tr.t)}
    records = []
    worst = 0.0
    for c in cps:
        i = index[c]
        x, y, q = float(tr.x[i]), float(tr.y[i]), float(tr.quad[i])
        resid = abs(1.0 / x - 1.0 / x0 - c + e * q)
        rx, ry = longtime_ratios(p, c, x, y)
        rec = {"t": c, "x": x, "y": y, "r_x": rx, "r_y": ry, "residual": resid}
        worst = max(worst, resid / (residual_tol * c))
        records.append(rec)
    last = records[-1]
    worst = max(worst, abs(last["r_x"] - e) / rx_tol, abs(last["r_y"] - 1.0) / ry_tol)
    return CheckReport.from_samples("longtime", records, worst, 1.0, None, eps=e, init=_pt(init),
                                    rtol=cfg.rtol, atol=cfg.atol, rx_tol=rx_tol, ry_tol=ry_tol,
                                    residual_tol=residual_tol)


# --------------------------------------------------------------------------
# concavity table
# --------------------------------------------------------------------------

def table1_bands(p: Params, x: np.ndarray, manifold: SlowManifold):
    """``(name, lower, upper, expected sign of h)`` for the six bands at ``x``."""
    h_ = core.H(p, x)
    y_ = core.inflection_curve_array(p, x)
    a_ = core.alpha(p, x)
    m_ = manifold.values(x)
    v_ = core.V(p, x)
    r3 = np.array([core.inflection_cubic_roots(p, xx)[2] for xx in x.tolist()])
    return (
        ("below_H", np.zeros_like(x), h_, -1),
        ("H_to_Y", h_, y_, -1),
        ("Y_to_alpha", y_, a_, 1),
        ("M_to_V", m_, v_, 1),
        ("V_to_root", v_, r3, -1),
        ("above_root", r3, 2.0 * r3 + 1.0, 1),
    )


def table1_scan(p: Params, n_per_region: int = 10_000, seed: int = DEFAULT_SEED,
                manifold: Optional[SlowManifold] = None) -> CheckReport:
    """Sign of ``h`` on random points of each band, ``x`` log-uniform in
    ``[1e-2, 1e2]``.  The violation is the number of misclassified points."""
    if n_per_region < 1:
        raise ValueError("n_per_region must be >= 1")
    rng = np.random.default_rng(seed)
    manifold = manifold or SlowManifold.build(p)
    x = 10.0 ** rng.uniform(-2.0, 2.0, n_per_region)
    u = rng.uniform(0.0, 1.0, n_per_region)
    records = []
    bad = 0
    for name, lo, hi, sign in table1_bands(p, x, manifold):
        y = lo + u * (hi - lo)
        inner = (y > lo) & (y < hi)
        h = core.h_aux_array(p, x[inner], y[inner])
        wrong = int(np.count_nonzero(np.sign(h) != sign))
        bad += wrong
        records.append({"band": name, "points": int(inner.sum()), "expected_sign": sign,
                        "misclassified": wrong})
    return CheckReport.from_samples("table1", records, bad, 0, seed,
                                    n_samples=sum(r["points"] for r in records), eps=p.eps)


# --------------------------------------------------------------------------
# suite driver
# --------------------------------------------------------------------------

def run_suite(
    name: str,
    p: Params,
    *,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    cfg: IntegratorConfig = IntegratorConfig(),
    longtime_cfg: IntegratorConfig = LONGTIME_CONFIG,
    n_inits: int = 100,
    n_per_region: int = 10_000,
) -> list[CheckReport]:
    """Run one named suite (or ``"all"``) and return its reports in a fixed order."""
    if name != "all" and name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    names = SUITES if name == "all" else (name,)
    inits = None
    out = []
    for s in names:
        if s == "concavity":
            out += [concavity_suite(p, seed=seed), tangency_check(p, seed=seed)]
        elif s == "fences":
            out.append(fences_suite(p, seed=seed))
        elif s in ("trapping", "attraction"):
            inits = inits or random_inits(n_inits, seed)
            if s == "trapping":
                out.append(trapping_suite(p, inits, cfg=cfg, threads=threads, seed=seed))
            else:
                out.append(attraction_suite(p, inits, cfg, threads=threads, seed=seed))
        elif s == "longtime":
            out.append(longtime_suite(p, cfg=longtime_cfg))
        elif s == "table1":
            out.append(table1_scan(p, n_per_region, seed=seed))
    return out
