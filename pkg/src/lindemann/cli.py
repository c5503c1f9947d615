"""Command-line entry point.

Every numeric field is written with ``repr(float)``, the shortest decimal
that parses back to the same double.  Exit codes: 0 success, 1 a
verification check failed, 2 usage error, 3 internal consistency violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import core
from .core import Params, PhasePoint
from .errors import BracketViolation, LindemannError, PoleAtX, SeamMismatch, Undecided
from .integrate import EventKind, IntegratorConfig, Status, integrate_planar
from .manifold import SHOOTING_CONFIG, TABLE_CONFIG, compute_backward, compute_bisection
from .series import infinity_coeffs, origin_coeffs
from .verify import DEFAULT_SEED, LONGTIME_CONFIG, SUITES, run_suite

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
CROSS_METHOD_TOL = 1e-7


class UsageError(Exception):
    pass


class InternalError(Exception):
    pass


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def dump_csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def dump_table(args, columns, rows, extra: Optional[dict] = None) -> str:
    if args.format == "json":
        body = {"columns": list(columns), "rows": [list(r) for r in rows]}
        body.update(extra or {})
        return dump_json(body)
    return dump_csv(columns, rows)


def emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# argument resolution
# --------------------------------------------------------------------------

def resolve_params(args) -> Params:
    triple = (args.k1, args.km1, args.k2)
    given = [v is not None for v in triple]
    if args.eps is not None and any(given):
        raise UsageError("give either --eps or --k1/--km1/--k2, not both")
    if args.eps is None:
        if not all(given):
            raise UsageError("give --eps or all of --k1, --km1, --k2")
        if not all(v > 0.0 for v in triple):
            raise UsageError("rate constants must be positive")
        return Params(args.km1 / args.k1)
    if not (math.isfinite(args.eps) and args.eps > 0.0):
        raise UsageError(f"--eps must be positive, got {args.eps!r}")
    return Params(args.eps)


def resolve_config(args, default: IntegratorConfig) -> IntegratorConfig:
    return IntegratorConfig(
        rtol=args.rtol if args.rtol is not None else default.rtol,
        atol=args.atol if args.atol is not None else default.atol,
        max_steps=args.max_steps if args.max_steps is not None else default.max_steps,
    )


def resolve_grid(args) -> np.ndarray:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if not (0.0 < args.xmin <= args.xmax and math.isfinite(args.xmax)):
        raise UsageError("need 0 < xmin <= xmax < inf")
    if args.n == 1:
        return np.array([args.xmin])
    if args.log:
        return np.logspace(math.log10(args.xmin), math.log10(args.xmax), args.n)
    return np.linspace(args.xmin, args.xmax, args.n)


def _parse_point(text: str) -> PhasePoint:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return PhasePoint(a, b)


def _read_inits(path: str) -> list[PhasePoint]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            out.append(_parse_point(line))
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _isocline_value(p: Params, x: float, c: float) -> Optional[float]:
    if c == -1.0:
        return 0.0
    try:
        return core.isocline_F(p, x, c)
    except PoleAtX:
        return None


def cmd_isoclines(args) -> int:
    p = resolve_params(args)
    xs = resolve_grid(args)
    slopes = list(args.slopes or [])
    columns = ["x", "H", "V", "alpha"] + [f"F({fmt(float(c))})" for c in slopes]
    rows = []
    for x in xs.tolist():
        rows.append([x, core.H(p, x), core.V(p, x), core.alpha(p, x)]
                    + [_isocline_value(p, x, c) for c in slopes])
    emit(args, dump_table(args, columns, rows, {"eps": p.eps}))
    return EXIT_OK


def cmd_slow_manifold(args) -> int:
    p = resolve_params(args)
    xs = resolve_grid(args)
    cfg = resolve_config(args, TABLE_CONFIG)
    columns = ["x", "M", "lower", "upper", "est_error", "method"]
    if args.method == "bisection":
        values = [compute_bisection(p, x, cfg=SHOOTING_CONFIG) for x in xs.tolist()]
        rows = []
        for x, m in zip(xs.tolist(), values):
            lo, hi = core.inflection_curve(p, x), core.alpha(p, x)
            rows.append([x, m, lo, hi, 1e-10, "Bisection"])
    else:
        table = compute_backward(p, xs, cfg)
        rows = [list(r) for r in table.rows()]
        if args.method == "both":
            columns += ["bisection", "abs_diff"]
            worst = 0.0
            for r in rows:
                b = compute_bisection(p, r[0], cfg=SHOOTING_CONFIG)
                r += [b, abs(b - r[1])]
                worst = max(worst, r[-1])
            if worst > CROSS_METHOD_TOL:
                emit(args, dump_table(args, columns, rows, {"eps": p.eps}))
                raise InternalError(f"backward and bisection differ by {worst!r}")
    emit(args, dump_table(args, columns, rows, {"eps": p.eps}))
    return EXIT_OK


_WATCH = (EventKind.CrossH, EventKind.CrossY, EventKind.CrossAlpha, EventKind.CrossV)


def cmd_portrait(args) -> int:
    p = resolve_params(args)
    inits = list(args.init or [])
    if args.inits_file:
        inits += _read_inits(args.inits_file)
    if not inits:
        raise UsageError("portrait needs at least one initial point (--init x,y or --inits-file)")
    if not args.t_max > 0.0:
        raise UsageError("--t-max must be positive")
    cfg = resolve_config(args, IntegratorConfig())
    traj_rows, event_rows, blocks = [], [], []
    failures = 0
    for i, q in enumerate(inits):
        try:
            tr = integrate_planar(p, q, args.t_max, cfg, _WATCH, thin=args.thin)
        except LindemannError as exc:
            failures += 1
            blocks.append({"index": i, "init": list(q), "status": f"Failed: {exc}"})
            continue
        if tr.status is not Status.Completed:
            failures += 1
        for t, x, y in zip(tr.t.tolist(), tr.x.tolist(), tr.y.tolist()):
            traj_rows.append([i, t, x, y])
        evs = [[i, ev.t, ev.kind.value, ev.point.x, ev.point.y] for ev in tr.events]
        event_rows += evs
        blocks.append({"index": i, "init": list(q), "status": tr.status.value,
                       "t": tr.t.tolist(), "x": tr.x.tolist(), "y": tr.y.tolist(),
                       "events": [{"t": e[1], "kind": e[2], "x": e[3], "y": e[4]} for e in evs]})
    if args.format == "json":
        emit(args, dump_json({"eps": p.eps, "trajectories": blocks}))
    else:
        traj = dump_csv(["trajectory", "t", "x", "y"], traj_rows)
        evs = dump_csv(["trajectory", "t", "kind", "x", "y"], event_rows)
        if args.out:
            emit(args, traj)
            events_path = args.events_out or _events_path(args.out)
            with open(events_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(evs)
        elif args.events_out:
            emit(args, traj)
            with open(args.events_out, "w", encoding="utf-8", newline="") as fh:
                fh.write(evs)
        else:
            emit(args, traj + "\n" + evs)
    for b in blocks:
        if b["status"] != Status.Completed.value:
            print(f"trajectory {b['index']}: {b['status']}", file=sys.stderr)
    if failures == len(inits):
        raise InternalError("every trajectory failed")
    return EXIT_OK


def _events_path(out: str) -> str:
    stem = out[:-4] if out.endswith(".csv") else out
    return stem + ".events.csv"


def _render_exact(v) -> str:
    f = Fraction(v)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def cmd_series(args) -> int:
    p = resolve_params(args)
    lowest = 2 if args.kind == "origin" else -1
    if args.order < lowest:
        raise UsageError(f"{args.kind} series needs --order >= {lowest}")
    build = origin_coeffs if args.kind == "origin" else infinity_coeffs
    s = build(p, args.order)
    columns = ["n", "coefficient"]
    exact = build(Fraction(p.eps), args.order, exact=True).coeffs if args.exact else None
    if exact is not None:
        columns.append("exact")
    rows = []
    for k, c in enumerate(s.coeffs):
        row = [k + lowest, float(c)]
        if exact is not None:
            row.append(_render_exact(exact[k]))
        rows.append(row)
    emit(args, dump_table(args, columns, rows, {"eps": p.eps, "kind": args.kind}))
    return EXIT_OK


def cmd_verify(args) -> int:
    p = resolve_params(args)
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    cfg = resolve_config(args, IntegratorConfig())
    long_cfg = resolve_config(args, LONGTIME_CONFIG)
    reports = run_suite(args.suite, p, seed=args.seed, threads=args.threads, cfg=cfg,
                        longtime_cfg=long_cfg, n_inits=args.n_inits,
                        n_per_region=args.n_per_region)
    passed = all(r.passed for r in reports)
    if args.format == "csv":
        cols = ["name", "passed", "samples_tested", "worst_violation", "tolerance", "seed"]
        rows = [[r.name, r.passed, r.samples_tested, r.worst_violation, r.tolerance, r.seed]
                for r in reports]
        emit(args, dump_csv(cols, rows))
    else:
        emit(args, dump_json({"eps": p.eps, "suite": args.suite, "seed": args.seed,
                              "passed": passed, "reports": [r.to_dict() for r in reports]}))
    return EXIT_OK if passed else EXIT_FAILED


def cmd_nondim(args) -> int:
    for name in ("k1", "km1", "k2"):
        v = getattr(args, name)
        if v is None:
            raise UsageError(f"nondim needs --{name}")
    try:
        res = core.nondimensionalize(args.k1, args.km1, args.k2, args.a0, args.b0)
    except LindemannError as exc:
        raise UsageError(str(exc)) from None
    emit(args, dump_json({"eps": res.params.eps, "x0": res.point.x, "y0": res.point.y,
                          "time_scale": res.time_scale}))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _common(grid: Optional[dict] = None, tolerances: bool = True) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(add_help=False)
    g = ap.add_argument_group("model")
    g.add_argument("--eps", type=float, help="dimensionless parameter k-1/k1")
    g.add_argument("--k1", type=float, help="rate constant of A+A -> A+B")
    g.add_argument("--km1", type=float, help="rate constant of A+B -> A+A")
    g.add_argument("--k2", type=float, help="rate constant of B -> P")
    o = ap.add_argument_group("output")
    o.add_argument("--out", help="output file (default: stdout)")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--config", help="JSON file of option defaults; flags override it")
    if tolerances:
        t = ap.add_argument_group("integration")
        t.add_argument("--rtol", type=float)
        t.add_argument("--atol", type=float)
        t.add_argument("--max-steps", type=int)
    if grid is not None:
        gg = ap.add_argument_group("grid")
        gg.add_argument("--xmin", type=float, default=grid["xmin"])
        gg.add_argument("--xmax", type=float, default=grid["xmax"])
        gg.add_argument("--n", type=int, default=grid["n"])
        gg.add_argument("--log", action=argparse.BooleanOptionalAction, default=grid["log"],
                        help="log-spaced grid")
    return ap


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lindemann",
        description="Phase-plane toolkit for the nondimensional Lindemann mechanism.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("isoclines", help="tabulate H, V, alpha and F(., c)",
                        parents=[_common({"xmin": 0.1, "xmax": 10.0, "n": 100, "log": False}, False)])
    sp.add_argument("--slopes", type=float, nargs="*", default=[], help="slope values c")
    sp.set_defaults(func=cmd_isoclines)

    sp = sub.add_parser("slow-manifold", help="tabulate the slow manifold with its bracket",
                        parents=[_common({"xmin": 1e-2, "xmax": 1e2, "n": 200, "log": True})])
    sp.add_argument("--method", choices=("backward", "bisection", "both"), default="backward")
    sp.set_defaults(func=cmd_slow_manifold)

    sp = sub.add_parser("portrait", help="integrate trajectories and record curve crossings",
                        parents=[_common()])
    sp.add_argument("--init", type=_parse_point, action="append", metavar="X,Y")
    sp.add_argument("--inits-file", help="file with one 'x,y' per line")
    sp.add_argument("--t-max", type=float, default=10.0)
    sp.add_argument("--thin", type=float, default=None,
                    help="keep a sample only after t grows by this relative amount")
    sp.add_argument("--events-out", help="events CSV path (default: <out>.events.csv)")
    sp.set_defaults(func=cmd_portrait)

    sp = sub.add_parser("series", help="coefficients of the origin or infinity expansion",
                        parents=[_common(tolerances=False)])
    sp.add_argument("--kind", choices=("origin", "infinity"), default="origin")
    sp.add_argument("--order", type=int, default=10)
    sp.add_argument("--exact", action="store_true", help="add an exact rational column")
    sp.set_defaults(func=cmd_series)

    sp = sub.add_parser("verify", help="run verification suites and write a JSON report",
                        parents=[_common()])
    sp.add_argument("--suite", choices=("all",) + SUITES, default="all")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--n-inits", type=int, default=100)
    sp.add_argument("--n-per-region", type=int, default=10_000)
    sp.set_defaults(func=cmd_verify, format="json")

    sp = sub.add_parser("nondim", help="map rate constants and concentrations to (eps, x0, y0)",
                        parents=[_common(tolerances=False)])
    sp.add_argument("--a0", type=float, default=0.0)
    sp.add_argument("--b0", type=float, default=0.0)
    sp.set_defaults(func=cmd_nondim, format="json")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    unknown = sorted(set(conf) - set(vars(args)))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**conf)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"lindemann: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InternalError, BracketViolation, SeamMismatch, Undecided) as exc:
        print(f"lindemann: consistency violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except LindemannError as exc:
        print(f"lindemann: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
