"""Command line front end.

Every subcommand prints one JSON report on stdout and a one-line summary on
stderr.  Exit status: 0 success, 1 computational failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cayley, distortion, poincare
from .cocycle import admissible, averaging, params as cparams, reps, thm71
from .group import GroupElement
from .report import dumps, to_jsonable, validate_report

COCYCLE_COMMANDS = ("finite", "pi-lambda", "lemma31", "lemma42", "lemma43", "lemma44", "params",
                    "compress", "thm71", "admissible")


class ComputationFailed(RuntimeError):
    """A check ran to completion but its verdict is negative."""


def _element(text: str) -> GroupElement:
    try:
        return GroupElement.parse(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _cells(text: str) -> int:
    try:
        return reps.GridSpec.parse_step(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _write_text(path: str | None, text: str, artifacts: list[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")
    artifacts.append(str(path))


# ----------------------------------------------------------------------
# group geometry


def cmd_ball(args, ctx):
    b = cayley.ball(args.radius)
    res = {"radius": args.radius, "size": len(b), "layer_sizes": b.layer_sizes()}
    if args.format == "csv" or args.out:
        ctx["csv"] = b.to_csv()
    return res


def cmd_dist(args, ctx):
    g = args.element
    d = cayley.dist(g, args.max_radius)
    if d is None:
        raise ComputationFailed(f"|{g}| exceeds max radius {args.max_radius}")
    return {"element": str(g), "distance": d, "max_radius": args.max_radius}


def cmd_growth(args, ctx):
    rep = cayley.growth_report(args.rmin, args.rmax)
    if args.format == "csv" or args.out:
        ctx["csv"] = "radius,size\n" + "".join(f"{r},{s}\n" for r, s in zip(rep.radii, rep.sizes))
    return {"radii": rep.radii, "sizes": rep.sizes, "slope": rep.slope}


def cmd_profile(args, ctx):
    prof = cayley.central_profile(args.k)
    squares = {n * n: prof[n * n - 1] for n in range(1, math.isqrt(args.k) + 1)}
    if args.format == "csv" or args.out:
        ctx["csv"] = "k,dist\n" + "".join(f"{k},{d}\n" for k, d in enumerate(prof, start=1))
    return {"k_max": args.k, "distances": prof, "at_squares": squares,
            "square_law_ok": all(d == 4 * math.isqrt(k) for k, d in squares.items())}


# ----------------------------------------------------------------------
# Poincare


def _eig_payload(r: poincare.EigResult) -> dict:
    return {"constant": r.constant, "residual": r.residual, "iterations": r.iterations,
            "method": r.method, "converged": r.converged}


def _eig_kwargs(args) -> dict:
    kw = {"seed": args.seed}
    if args.method == "sample":
        kw["samples"] = args.samples
    if args.method == "iterative":
        kw["tol"] = args.tol
        kw["max_iter"] = args.max_iter
    return kw


def cmd_poincare(args, ctx):
    fp = poincare.build_forms(args.radius, args.preset)
    r = poincare.best_constant(fp, args.method, **_eig_kwargs(args))
    res = {"radius": args.radius, "preset": fp.preset, "rho": fp.rho, "vertices": fp.vertex_count,
           "l_pairs": len(fp.L.w), "m_pairs": len(fp.M.w), **_eig_payload(r)}
    if r.constant > 0 and math.isfinite(r.constant):
        res["distortion_lower_bound"] = poincare.distortion_lower_bound(args.radius, r.constant, fp.rho)
    if args.format == "csv" or args.out:
        ctx["csv"] = poincare.witness_csv(fp.vertices, r.witness)
    return res


def cmd_local_poincare(args, ctx):
    lp = poincare.build_local_forms(args.radius, args.inner_factor, args.outer_factor)
    r = poincare.generalized_top(lp.num, lp.M, args.method, **_eig_kwargs(args))
    return {"radius": args.radius, "inner_radius": lp.inner, "outer_radius": lp.outer,
            "vertices": len(lp.vertices), **_eig_payload(r)}


def cmd_lower_bound(args, ctx):
    _, rho = poincare.parse_preset(args.preset)
    C = args.constant
    solved = None
    if C is None:
        fp = poincare.build_forms(args.radius, args.preset)
        solved = poincare.best_constant(fp, "iterative", seed=args.seed)
        C = solved.constant
    lb = poincare.distortion_lower_bound(args.radius, C, rho)
    res = {"radius": args.radius, "rho": rho, "constant": C, "central_sum": poincare.central_sum(args.radius),
           "lower_bound": lb}
    if solved is not None:
        res["residual"] = solved.residual
    return res


# ----------------------------------------------------------------------
# distortion


def _instance(args) -> distortion.MetricInstance:
    if args.instance:
        with open(args.instance, newline="", encoding="utf-8") as fh:
            return distortion.MetricInstance.from_csv(fh)
    return distortion.ball_instance(args.radius)


def _coords_csv(m: distortion.MetricInstance, coords: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label"] + [f"c{k}" for k in range(coords.shape[1])])
    for lab, row in zip(m.labels, coords):
        w.writerow([lab] + [repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_distort(args, ctx):
    m = _instance(args)
    if args.p == 2 and args.dim is None:
        r = distortion.min_distortion_l2(m, args.tol, seed=args.seed)
        check = distortion.verify_embedding(m, r.D, gram=r.gram, tol=args.tol)
        res = {"points": len(m), "D": r.D, "tol": args.tol, "iters": r.iterations,
               "max_violation": r.certificate, "gram_min_eig": r.gram_min_eig,
               "verified": check["ok"], "method": r.method, "converged": r.converged}
        if not check["ok"]:
            ctx["failure"] = "embedding failed the independent verifier"
    else:
        r = distortion.heuristic_embed_lp(m, args.p, args.dim or 2, args.iters, seed=args.seed)
        res = {"points": len(m), "D": r.D, "p": args.p, "dim": r.coords.shape[1], "method": r.method}
    if args.format == "csv" or args.out:
        ctx["csv"] = _coords_csv(m, r.coords)
    return res


def cmd_embed_lp(args, ctx):
    m = _instance(args)
    r = distortion.heuristic_embed_lp(m, args.p, args.dim, args.iters, seed=args.seed)
    if args.format == "csv" or args.out:
        ctx["csv"] = _coords_csv(m, r.coords)
    return {"points": len(m), "D": r.D, "p": args.p, "dim": args.dim, "iters": args.iters,
            "history": r.history}


def cmd_trend(args, ctx):
    if len(set(args.radii)) < 3 or min(args.radii) < 1:
        raise ValueError("--radii needs at least 3 distinct positive radii")
    series = []
    for R in args.radii:
        r = distortion.min_distortion_l2(distortion.ball_instance(R), args.tol, seed=args.seed)
        series.append((R, r.D))
    fit = distortion.trend_fit(series)
    return {"series": [{"R": R, "D": D} for R, D in series], "slope": fit.slope,
            "intercept": fit.intercept, "r2": fit.r2}


# ----------------------------------------------------------------------
# cocycle lab


def cmd_finite(args, ctx):
    rep = reps.make_finite_rep(args.q)
    rng = np.random.default_rng(args.seed)
    ax = rep.check_axioms(rng)
    f = reps.Coboundary.random(rep, rng)
    worst = _cocycle_identity(f, rng, args.pairs, span=args.q)
    return {"q": args.q, "zeta": rep.zeta, "axioms": ax, "cocycle_identity_error": worst,
            "lipschitz": f.lipschitz_constant()}


def _cocycle_identity(f, rng, pairs: int, span: int) -> float:
    worst = 0.0
    lim = max(1, min(span, 50))
    for _ in range(pairs):
        g = GroupElement(*(int(v) for v in rng.integers(-lim, lim + 1, 3)))
        h = GroupElement(*(int(v) for v in rng.integers(-lim, lim + 1, 3)))
        lhs = f(g * h)
        rhs = f.rep.apply(g, f(h)) + f(g)
        worst = max(worst, f.rep.norm(lhs - rhs))
    return worst


def cmd_pi_lambda(args, ctx):
    grid = reps.GridSpec(args.half_width, args.step, args.margin)
    rep = reps.make_discretized_rep(args.lam, grid)
    rng = np.random.default_rng(args.seed)
    ax = rep.check_axioms(rng)
    f = thm71.unit_coboundary(args.lam, args.h, grid)
    ws = np.linspace(0.0, 3.0, 13)
    err = max(abs(rep.norm(f.central(w)) ** 2 - 4 * math.sin(math.pi * args.lam * w) ** 2) for w in ws)
    return {"lambda": args.lam, "grid_points": grid.size, "cells_per_unit": grid.cells_per_unit,
            "axioms": ax, "central_identity_error": err}


def cmd_lemma31(args, ctx):
    rng = np.random.default_rng(args.seed)
    worst = math.inf
    for _ in range(args.trials):
        d = int(rng.integers(1, args.max_dim + 1))
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        r = averaging.check_lemma31(Q, z, args.ell, args.i_max)
        worst = min(worst, r["slack"])
    ok = worst >= -averaging.ROUNDING
    if not ok:
        ctx["failure"] = "dyadic average bound violated"
    return {"trials": args.trials, "ell": args.ell, "i_max": args.i_max, "min_slack": worst, "ok": ok}


def _random_coboundary(q: int, seed: int):
    rep = reps.make_finite_rep(q)
    return reps.Coboundary.random(rep, np.random.default_rng(seed))


def cmd_lemma42(args, ctx):
    sel = cparams.select_parameters(args.p, args.t)
    f = _random_coboundary(args.q, args.seed)
    r = averaging.check_lemma42(f, sel.k, sel.m, sel.ell, float(sel.p), 1.0, n_list=args.n)
    if not r["ok"]:
        ctx["failure"] = "generator window bound not attained"
    return {"q": args.q, "params": sel.as_dict(), **r}


def cmd_lemma43(args, ctx):
    f = _random_coboundary(args.q, args.seed)
    r = averaging.check_lemma43(f, args.m, args.n, range(1, args.kmax + 1))
    if not r["optimize_ok"]:
        ctx["failure"] = "explicit averaging bound violated"
    return {"q": args.q, "m": args.m, "n": args.n, **r}


def cmd_lemma44(args, ctx):
    f = _random_coboundary(args.q, args.seed)
    r = averaging.check_lemma44(f, args.m, args.n)
    return {"q": args.q, "m": args.m, "n": args.n, **r}


def cmd_params(args, ctx):
    sel = cparams.select_parameters(args.p, args.t)
    return {**sel.as_dict(), "checks": cparams.verify_selection(sel)}


def cmd_compress(args, ctx):
    f = _random_coboundary(args.q, args.seed)
    return {"q": args.q, **averaging.compression_experiment(f, args.p, args.t)}


def cmd_thm71(args, ctx):
    grid = None
    if args.step is not None:
        grid = reps.GridSpec(args.half_width or thm71.support_half_width(args.h), args.step, 1)
    r = thm71.check_thm71(args.lam, args.h, grid)
    if not r["grid_ok"]:
        ctx["failure"] = "grid too coarse: refinement changed the generator energy by more than 1%"
    elif not r["w_bound_ok"]:
        ctx["failure"] = f"central energy {r['lhs_upper']:.6g} exceeds {r['w_bound']:.6g}"
    return r


def cmd_admissible(args, ctx):
    theta = admissible.theta_family(args.family, args.alpha)
    r = admissible.admissibility(theta, args.tmax)
    return {"family": args.family, "alpha": args.alpha, "tmax": args.tmax, **r}


# ----------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_nonneg_int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=None, help="cap on BLAS threads")
    p.add_argument("--out", default=None, help="write the CSV artifact here")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="csv also emits the tabular artifact (to --out, else stdout)")
    return p


def _instance_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--radius", type=_positive_int)
    g.add_argument("--instance", help="CSV file with header i,j,d")


def _eig_args(p, default_method="iterative"):
    p.add_argument("--method", choices=("dense", "iterative", "sample"), default=default_method)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="heisgeom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ball", parents=[common], help="enumerate B_R")
    p.add_argument("--radius", type=_nonneg_int, required=True)
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("dist", parents=[common], help="word length of an element")
    p.add_argument("--element", type=_element, required=True, help="x,y,z")
    p.add_argument("--max-radius", type=_nonneg_int, default=30)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("growth", parents=[common], help="ball sizes and log-log slope")
    p.add_argument("--rmin", type=_positive_int, default=8)
    p.add_argument("--rmax", type=_positive_int, default=32)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("profile", parents=[common], help="word length of c^k for k <= K")
    p.add_argument("--k", type=_positive_int, required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("poincare", parents=[common], help="best Poincare constant")
    p.add_argument("--radius", type=_positive_int, required=True)
    p.add_argument("--preset", default="paper", help="paper or mini:RHO")
    _eig_args(p)
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("local-poincare", parents=[common], help="local variance Poincare constant")
    p.add_argument("--radius", type=_positive_int, required=True)
    p.add_argument("--inner-factor", type=_positive_int, default=7)
    p.add_argument("--outer-factor", type=_positive_int, default=22)
    _eig_args(p)
    p.set_defaults(func=cmd_local_poincare)

    p = sub.add_parser("lower-bound", parents=[common], help="distortion lower bound from a constant")
    p.add_argument("--radius", type=_positive_int, required=True)
    p.add_argument("--constant", type=float, default=None, help="solve for it when omitted")
    p.add_argument("--preset", default="paper")
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("distort", parents=[common], help="least Euclidean distortion (or l_p heuristic)")
    _instance_args(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--iters", type=_positive_int, default=2000)
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("embed-lp", parents=[common], help="heuristic l_p embedding")
    _instance_args(p)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--iters", type=_positive_int, default=2000)
    p.set_defaults(func=cmd_embed_lp)

    p = sub.add_parser("trend", parents=[common], help="fit D^2 against log R")
    p.add_argument("--radii", type=_int_list, default=[2, 3, 4])
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_trend)

    cp = sub.add_parser("cocycle", help="representation and cocycle checks")
    csub = cp.add_subparsers(dest="cocycle_command", required=True)

    p = csub.add_parser("finite", parents=[common])
    p.add_argument("--q", type=_positive_int, required=True)
    p.add_argument("--pairs", type=_positive_int, default=1000)
    p.set_defaults(func=cmd_finite)

    p = csub.add_parser("pi-lambda", parents=[common])
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--half-width", type=float, default=9.0)
    p.add_argument("--step", type=_cells, default=64, help="grid step 1/S")
    p.add_argument("--margin", type=_nonneg_int, default=2)
    p.add_argument("--h", choices=thm71.H_KINDS, default="gaussian")
    p.set_defaults(func=cmd_pi_lambda)

    p = csub.add_parser("lemma31", parents=[common])
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--max-dim", type=_positive_int, default=64)
    p.add_argument("--ell", type=_positive_int, default=3)
    p.add_argument("--i-max", type=_nonneg_int, default=8)
    p.set_defaults(func=cmd_lemma31)

    p = csub.add_parser("lemma42", parents=[common])
    p.add_argument("--q", type=_positive_int, default=1024)
    p.add_argument("--p", type=str, default="2")
    p.add_argument("--t", type=str, default="100")
    p.add_argument("--n", type=_int_list, default=[4, 16])
    p.set_defaults(func=cmd_lemma42)

    for name, fn in (("lemma43", cmd_lemma43), ("lemma44", cmd_lemma44)):
        p = csub.add_parser(name, parents=[common])
        p.add_argument("--q", type=_positive_int, default=1024)
        p.add_argument("--m", type=_nonneg_int, required=True)
        p.add_argument("--n", type=_positive_int, required=True)
        if name == "lemma43":
            p.add_argument("--kmax", type=_positive_int, default=32)
        p.set_defaults(func=fn)

    p = csub.add_parser("params", parents=[common])
    p.add_argument("--p", type=str, required=True)
    p.add_argument("--t", type=str, required=True)
    p.set_defaults(func=cmd_params)

    p = csub.add_parser("compress", parents=[common])
    p.add_argument("--q", type=_positive_int, default=4096)
    p.add_argument("--p", type=str, default="2")
    p.add_argument("--t", type=str, default="100")
    p.set_defaults(func=cmd_compress)

    p = csub.add_parser("thm71", parents=[common])
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--h", choices=thm71.H_KINDS, default="gaussian")
    p.add_argument("--step", type=_cells, default=None, help="grid step 1/S (default 8|lambda|X)")
    p.add_argument("--half-width", type=float, default=None)
    p.set_defaults(func=cmd_thm71)

    p = csub.add_parser("admissible", parents=[common])
    p.add_argument("--family", choices=("linear", "sqrt", "log"), default="log")
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--tmax", type=float, default=1e12)
    p.set_defaults(func=cmd_admissible)
    return parser


_SKIP = {"func", "command", "cocycle_command", "seed", "threads", "out", "format"}


def _thread_limit(n: int | None):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _error_payload(exc: BaseException) -> dict:
    out = {"type": type(exc).__name__, "message": str(exc)}
    for key in ("residual", "iterations", "estimate"):
        if hasattr(exc, key):
            out[key] = getattr(exc, key)
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in COCYCLE_COMMANDS:
        argv = ["cocycle"] + argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    command = args.command if args.command != "cocycle" else f"cocycle {args.cocycle_command}"
    params = {k: (str(v) if isinstance(v, GroupElement) else v) for k, v in vars(args).items() if k not in _SKIP}
    ctx: dict = {}
    artifacts: list[str] = []
    start = time.perf_counter()
    status, error, results = "ok", None, {}
    try:
        with _thread_limit(args.threads):
            results = args.func(args, ctx)
        if "failure" in ctx:
            status, error = "failed", {"type": "CheckFailed", "message": ctx["failure"]}
    except (cayley.BudgetExceeded, poincare.ConvergenceError, poincare.DisconnectedGraph,
            distortion.BracketError, cparams.ParameterError, averaging.PreconditionError,
            reps.MarginExceeded, admissible.NonMonotone, ComputationFailed, ArithmeticError) as exc:
        status, error = "failed", _error_payload(exc)
    except (ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"heisgeom: error: {exc}", file=sys.stderr)
        return 2

    if "csv" in ctx and status == "ok":
        if args.out or args.format == "csv":
            _write_text(args.out, ctx["csv"], artifacts)
    report = {
        "command": command,
        "params": to_jsonable(params),
        "results": to_jsonable(results),
        "seed": args.seed,
        "wall_ms": int(round((time.perf_counter() - start) * 1000)),
        "version": __version__,
        "status": status,
    }
    if artifacts:
        report["artifacts"] = artifacts
    if error is not None:
        report["error"] = to_jsonable(error)
    validate_report(report)
    # with csv on stdout and no --out, keep stdout pure CSV and move the report to stderr
    stream = sys.stderr if (args.format == "csv" and args.out is None and "csv" in ctx) else sys.stdout
    stream.write(dumps(report) + "\n")
    summary = f"{command}: {status} in {report['wall_ms']} ms"
    if error is not None:
        summary += f" ({error['message']})"
    print(summary, file=sys.stderr)
    return 0 if status == "ok" else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
