"""Command-line front-end.

Exit status: 0 on success, 1 on usage errors (bad flags, missing files,
out-of-range parameters), 2 on numerical failures, which also print a JSON
error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import acceptance
from .bnf import bnf_direct, bnf_quantified
from .errors import NumericalError
from .kam import KamState, default_schedule, kam_iterate
from .maps import (
    GeneratingMap,
    compose_generating,
    eval_map,
    iterate_map,
    jacobian,
    standard_map,
    twist_map,
)
from .measure import (
    build_counterexample,
    classify_orbit,
    counterexample_base,
    find_periodic_orbit,
    measure_scan,
)
from .potential import HoleDomain, harmonic_measure_mc, jensen_bound, load_domain
from .resonance import flatness_bound, pendulum_reduce, residue_check
from .rng import resolve_threads
from .series import FourierTaylorSeries, mul, poisson_bracket
from .small_divisors import ResonanceZone, _bisect, parse_omega


class UsageError(Exception):
    """Invalid command-line input (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _pair(text, kind=float):
    try:
        a, b = (kind(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers, got %r" % text)
    return a, b


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, got %r" % text)


def _grid(text):
    return _pair(text, int)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError("cannot read %s: %s" % (path, exc.strerror))
    except json.JSONDecodeError as exc:
        raise UsageError("%s is not valid JSON: %s" % (path, exc))


def _load_map(path):
    d = _read_json(path)
    try:
        return GeneratingMap.from_dict(d, check=False)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError("%s is not a map file: %s" % (path, exc))


def _load_series(path):
    d = _read_json(path)
    try:
        return FourierTaylorSeries.from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError("%s is not a series file: %s" % (path, exc))


def _emit(args, payload, text=None):
    """Write the report to ``--out`` (or stdout) and a one-line summary."""
    body = text if text is not None else json.dumps(payload, indent=1, default=float)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body if body.endswith("\n") else body + "\n")
    else:
        sys.stdout.write(body if body.endswith("\n") else body + "\n")


def _summary(msg):
    print(msg, file=sys.stderr)


_RANGES = {
    "m": (lambda v: 0 < v <= 1, "--m must lie in (0, 1]"),
    "sigma": (lambda v: v > 0, "--sigma must be positive"),
    "rho": (lambda v: v > 0, "--rho must be positive"),
    "walks": (lambda v: v >= 1, "--walks must be >= 1"),
    "iters": (lambda v: v >= 4, "--iters must be >= 4"),
    "tol": (lambda v: v > 0, "--tol must be positive"),
    "grid": (lambda v: min(v) >= 1, "--grid needs positive sizes"),
    "t": (lambda v: all(x > 0 for x in v) if isinstance(v, list) else v > 0, "--t must be positive"),
    "steps": (lambda v: v >= 1, "--steps must be >= 1"),
    "order": (lambda v: v >= 1, "--order must be >= 1"),
    "nodes": (lambda v: v >= 64, "--nodes must be >= 64"),
    "radius": (lambda v: v > 0, "--radius must be positive"),
    "L": (lambda v: v > 0, "--L must be positive"),
    "q": (lambda v: v >= 1, "--q must be >= 1"),
    "n": (lambda v: v >= 0, "--n must be >= 0"),
    "levels": (lambda v: v >= 1, "--levels must be >= 1"),
    "h": (lambda v: v > 0, "--h must be positive"),
    "threads": (lambda v: v >= 1, "--threads must be >= 1"),
}


def _check_ranges(args):
    for key, (ok, msg) in _RANGES.items():
        val = getattr(args, key, None)
        if val is not None and not ok(val):
            raise UsageError(msg)


def _config(args):
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_series(args):
    a = _load_series(args.a)
    if args.op == "eval":
        theta, r = args.x
        val = complex(a.evaluate(np.array([theta]), np.array([r]))[0])
        _emit(args, {"value": val.real, "imag": val.imag})
        return
    b = _load_series(args.b) if args.b else None
    if b is None:
        raise UsageError("series %s needs --b" % args.op)
    if args.op == "add":
        out = a + b
    elif args.op == "mul":
        out = mul(a, b)
    else:
        out = poisson_bracket(a, b)
    _emit(args, out.to_dict())
    _summary("series %s: result box (%d, %d)" % (args.op, out.n_r_max, out.n_theta_max))


def cmd_map(args):
    if args.op == "standard":
        m = standard_map(args.K, omega0=args.omega0)
        _emit(args, m.to_dict())
        return
    if args.op == "twist":
        m = twist_map([0.0, args.omega0, 0.5])
        _emit(args, m.to_dict())
        return
    if not args.map:
        raise UsageError("map %s needs --map" % args.op)
    m = _load_map(args.map)
    if args.op == "compose":
        other = _load_map(args.other) if args.other else None
        if other is None:
            raise UsageError("map compose needs --other")
        out = compose_generating(m.f, other.f, order=args.order)
        _emit(args, out.to_dict())
        return
    if args.x is None:
        raise UsageError("map %s needs --x" % args.op)
    if args.op == "eval":
        y = eval_map(m, args.x)
        _emit(args, {"theta": y.theta, "r": y.r})
    elif args.op == "jacobian":
        _emit(args, {"jacobian": np.asarray(jacobian(m, args.x)).reshape(2, 2).tolist()})
    else:
        th, r = iterate_map(m, np.array([args.x[0]]), np.array([args.x[1]]), args.n)
        _emit(args, {"theta": float(th[0]), "r": float(r[0]), "n": args.n})


def cmd_bnf(args):
    m = _load_map(args.map)
    if args.engine == "direct":
        res = bnf_direct(m, args.order)
    else:
        res = bnf_quantified(m, args.order, p=args.p)
    _emit(args, {"xi": res.xi.tolist(), "step_norms": [float(x) for x in res.step_norms],
                 "config": _config(args)})
    _summary("bnf %s: xi through order %d" % (args.engine, args.order))


def _load_schedule(path, steps):
    if not path:
        return default_schedule(steps)
    d = _read_json(path)
    rows = d["schedule"] if isinstance(d, dict) else d
    try:
        sched = [(int(N), float(K), float(delta)) for N, K, delta in rows]
    except (TypeError, ValueError):
        raise UsageError("schedule must be a list of [N, K, delta] triples")
    return sched[:steps]


def cmd_kam(args):
    m = _load_map(args.map)
    hist = kam_iterate(KamState.from_map(m), _load_schedule(args.schedule, args.steps))
    steps = [{"step": s.step, "norm": s.norms[-1], "zones": [z.to_dict() for z in s.excluded]}
             for s in hist]
    _emit(args, {"steps": steps, "envelope": hist.envelope, "error": hist.error, "config": _config(args)})
    _summary("kam: %d steps, final norm %.3g" % (len(hist) - 1, hist[-1].norms[-1]))
    if hist.error:
        detail = {k: v for k, v in hist.error.items() if k != "message"}
        raise NumericalError(hist.error.get("message", "step failed"), **detail)


def _resonance_center(m, p, q, interval):
    w = m.omega.derivative()
    target = p / q
    a, b = interval
    if (float(w(a)) - target) * (float(w(b)) - target) > 0:
        raise UsageError("frequency %g/%g is not attained on [%g, %g]" % (p, q, a, b))
    return _bisect(lambda r: float(w(r)) - target, a, b)


def cmd_resonance(args):
    m = _load_map(args.map)
    if math.gcd(args.p, args.q) != 1:
        raise UsageError("p/q must be reduced")
    rho = m.strip.rho
    center = _resonance_center(m, args.p, args.q, (-rho, rho))
    zone = ResonanceZone(args.p, args.q, center, args.radius)
    red = pendulum_reduce(m, zone, L=args.L)
    t = args.t if args.t else 2.0 * red.lam
    contour, formula = residue_check(red, t, args.nodes)
    bound = flatness_bound(abs(contour), red)
    out = {"e0_sup": red.eps0, "e1_sup": red.eps1, "residue_contour": contour.real,
           "residue_contour_imag": contour.imag, "residue_formula": formula, "bound": bound,
           "center": center, "reduction": red.to_dict(), "config": _config(args)}
    _emit(args, out)
    _summary("resonance %d/%d at r=%.6g: residue %.6g (formula %.6g)" % (args.p, args.q, center, contour.real,
                                                                       formula))


def _domain(args):
    if args.domain:
        try:
            return load_domain(args.domain)
        except OSError as exc:
            raise UsageError("cannot read %s: %s" % (args.domain, exc.strerror))
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError("%s is not a domain file: %s" % (args.domain, exc))
    return HoleDomain(args.rho)


def cmd_jensen(args):
    dom = _domain(args)
    z = complex(*args.z)
    if args.op == "bound":
        if args.sigma is None or args.m is None:
            raise UsageError("jensen bound needs --sigma and --m")
        val = jensen_bound(dom, args.sigma, args.m, z, hole_scale=args.hole_scale)
        _emit(args, {"bound": val, "config": _config(args)})
        _summary("ln|f(z)| <= %.6g" % val)
    else:
        p, err = harmonic_measure_mc(dom, z, args.target, args.walks, sigma=args.sigma, seed=args.seed,
                                     threads=args.threads)
        _emit(args, {"estimate": p, "stderr": err, "config": _config(args)})
        _summary("harmonic measure %.5f +/- %.5f" % (p, err))


def cmd_measure(args):
    m = _load_map(args.map)
    rep = measure_scan(m, args.t, args.grid, args.iters, args.tol, threads=args.threads)
    _emit(args, None, rep.to_csv())
    _summary("measure scan: %d bands" % len(rep.t_values))


def cmd_orbit(args):
    m = _load_map(args.map)
    if args.op == "classify":
        d = classify_orbit(m, args.x, args.iters, args.tol)
        _emit(args, d.to_dict())
        _summary("orbit %s" % d.classification)
    else:
        orb = find_periodic_orbit(m, args.p, args.q, args.x)
        _emit(args, orb.to_dict())
        _summary("periodic orbit: %s" % orb.kind)


def cmd_counterexample(args):
    omega0 = parse_omega(args.omega0)
    indices = args.index if args.index else list(range(args.levels))
    m = build_counterexample(omega0, counterexample_base(omega0), indices, args.h)
    _emit(args, m.to_dict())
    _summary("counterexample with q = %s" % [t["q"] for t in m.meta["terms"]])


def cmd_selftest(args):
    results, dig = acceptance.run_all(seed=args.seed, threads=args.threads, only=args.only)
    print("digest %s" % dig)
    ok = acceptance.suite_passed(results)
    if not ok:
        raise NumericalError("acceptance criteria failed",
                             failed=[r.ident for r in results if not r.passed and not r.expected_failure])


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    def globals_parser(default):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=default, help="global random seed (selftest: 7)")
        g.add_argument("--threads", type=int, default=default,
                       help="worker count (default: $ANNULUS_BNF_THREADS or 1)")
        g.add_argument("--out", default=default, help="write the report to this file")
        return g

    # flags may precede or follow the subcommand; the subcommand copy must not
    # overwrite a value given before it
    common = globals_parser(argparse.SUPPRESS)
    p = _Parser(prog="annulus-bnf", description="Normal forms, KAM steps and resonance experiments for twist maps.",
                parents=[globals_parser(None)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("series", parents=[common], help="series arithmetic")
    s.add_argument("op", choices=["add", "mul", "bracket", "eval"])
    s.add_argument("--a", required=True)
    s.add_argument("--b")
    s.add_argument("--x", type=_pair, help="theta,r for eval")
    s.set_defaults(func=cmd_series)

    s = sub.add_parser("map", parents=[common], help="build, evaluate or compose maps")
    s.add_argument("op", choices=["standard", "twist", "eval", "jacobian", "iterate", "compose"])
    s.add_argument("--map")
    s.add_argument("--other")
    s.add_argument("--x", type=_pair)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--K", type=float, default=0.5)
    s.add_argument("--omega0", type=parse_omega, default=0.0)
    s.add_argument("--order", type=int, default=12)
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("bnf", parents=[common], help="normal form")
    s.add_argument("op", choices=["compute"])
    s.add_argument("--map", required=True)
    s.add_argument("--order", type=int, default=8)
    s.add_argument("--engine", choices=["direct", "quantified"], default="quantified")
    s.add_argument("--p", type=int, default=5)
    s.set_defaults(func=cmd_bnf)

    s = sub.add_parser("kam", parents=[common], help="KAM iteration")
    s.add_argument("op", choices=["run"])
    s.add_argument("--map", required=True)
    s.add_argument("--steps", type=int, default=4)
    s.add_argument("--schedule")
    s.set_defaults(func=cmd_kam)

    s = sub.add_parser("resonance", parents=[common], help="pendulum reduction at p/q")
    s.add_argument("op", choices=["analyze"])
    s.add_argument("--map", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--radius", type=float, default=0.05)
    s.add_argument("--L", type=float, default=10.0)
    s.add_argument("--t", type=float, default=None)
    s.add_argument("--nodes", type=int, default=256)
    s.set_defaults(func=cmd_resonance)

    s = sub.add_parser("jensen", parents=[common], help="two-constant bound and harmonic measure")
    s.add_argument("op", choices=["bound", "mc"])
    s.add_argument("--domain")
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--sigma", type=float)
    s.add_argument("--m", type=float)
    s.add_argument("--z", type=_pair, default=(0.5, 0.0))
    s.add_argument("--walks", type=int, default=100_000)
    s.add_argument("--target", default="inner")
    s.add_argument("--hole-scale", type=float, default=2.0)
    s.set_defaults(func=cmd_jensen)

    s = sub.add_parser("measure", parents=[common], help="non-regular measure scan")
    s.add_argument("op", choices=["scan"])
    s.add_argument("--map", required=True)
    s.add_argument("--t", type=_floats, required=True)
    s.add_argument("--grid", type=_grid, default=(400, 400))
    s.add_argument("--iters", type=int, default=100_000)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("orbit", parents=[common], help="orbit classification and periodic orbits")
    s.add_argument("op", choices=["classify", "periodic"])
    s.add_argument("--map", required=True)
    s.add_argument("--x", type=_pair, required=True)
    s.add_argument("--iters", type=int, default=100_000)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--p", type=int, default=0)
    s.add_argument("--q", type=int, default=1)
    s.set_defaults(func=cmd_orbit)

    s = sub.add_parser("counterexample", parents=[common], help="resonant perturbation of a twist")
    s.add_argument("op", choices=["build"])
    s.add_argument("--omega0", default="golden")
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--index", type=lambda t: [int(v) for v in t.split(",")], default=None,
                   help="explicit convergent indices")
    s.add_argument("--h", type=float, default=0.5)
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", type=lambda t: set(t.split(",")), default=None)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.threads = resolve_threads(args.threads)
        if args.seed is None:
            args.seed = 7 if args.command == "selftest" else 0
        _check_ranges(args)
        args.func(args)
    except UsageError as exc:
        print("annulus-bnf: error: %s" % exc, file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except ValueError as exc:
        print("annulus-bnf: error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
