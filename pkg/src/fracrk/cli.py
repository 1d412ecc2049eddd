"""Command line interface: ``fracrk <command> [options]``.

Exit status is 0 on success, 2 on invalid input and 1 when a computation
fails or a certified bound is violated.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import scipy.io

from . import experiments as ex
from .certificate import certify, error_bound
from .discretize import GENERATORS, SpectralInterval, make_operator, spectral_bounds
from .functions import UnboundedAtZero, format_function, parse_function
from .linalg import FactorizationError, m_norm
from .poles import STRATEGIES, PoleSet, load_poles, make_poles, save_poles
from .rkm import apply_f, build_basis, exact_apply, solve_fode

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _interval_arg(text: str) -> SpectralInterval:
    try:
        lo, hi = (float(v) for v in text.split(","))
        return SpectralInterval(lo, hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' with 0 < lo <= hi: {exc}") from None


def read_vector(path: str | Path) -> np.ndarray:
    """Plain text (one entry per line) or a matrix-market array."""
    path = Path(path)
    if path.suffix == ".mtx":
        return np.asarray(scipy.io.mmread(path), dtype=float).ravel()
    return np.loadtxt(path, dtype=float, ndmin=1)


def write_vector(vec: np.ndarray, path: str | Path | None) -> None:
    if path is None:
        np.savetxt(sys.stdout, vec, fmt="%.17g")
        return
    path = Path(path)
    if path.suffix == ".mtx":
        scipy.io.mmwrite(path, vec.reshape(-1, 1))
    else:
        np.savetxt(path, vec, fmt="%.17g")


def _add_operator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--operator", choices=sorted(GENERATORS), default="fd2d")
    p.add_argument("--size", type=int, default=31, help="nodes per side (default 31)")
    p.add_argument("--safety", type=float, default=1.0, help="interval widening factor")
    p.add_argument("--interval", type=_interval_arg, help="override the spectral interval, 'lo,hi'")


def _add_pole_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default="Z")
    p.add_argument("--k", type=int, default=10, help="number of poles")
    p.add_argument("--poles", dest="pole_file", help="read poles from a file instead")
    p.add_argument("--seed", type=int, default=0, help="seed of the random starting vector")


def _operator_interval(args):
    op = make_operator(args.operator, args.size)
    interval = args.interval.widened(args.safety) if args.interval else spectral_bounds(op, args.safety)
    return op, interval


def _start_vector(op, args) -> np.ndarray:
    if getattr(args, "vector", None):
        b = read_vector(args.vector)
        if b.shape != (op.n,):
            raise UsageError(f"vector has length {b.size}, operator has N = {op.n}")
        return b
    b = np.random.default_rng(args.seed).standard_normal(op.n)
    return b / m_norm(b, op.M)


def _pole_set(args, interval, op=None, b=None) -> PoleSet:
    if args.pole_file:
        return load_poles(args.pole_file)
    return make_poles(args.strategy, args.k, interval, op, b)


def cmd_poles(args) -> int:
    if args.strategy in ("G", "S", "F") or args.interval is None:
        op, interval = _operator_interval(args)
        b = _start_vector(op, args)
    else:
        op, b = None, None
        interval = args.interval.widened(args.safety)
    ps = make_poles(args.strategy, args.k, interval, op, b)
    if args.out:
        save_poles(ps, args.out)
    else:
        for x in ps.sequence:
            print(repr(x))
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.interval is not None:
        interval = args.interval.widened(args.safety)
        op = b = None
        if args.strategy in ("G", "S", "F") and not args.pole_file:
            op = make_operator(args.operator, args.size)
            b = _start_vector(op, args)
    else:
        op, interval = _operator_interval(args)
        b = _start_vector(op, args)
    ps = _pole_set(args, interval, op, b)
    cert = certify(ps, interval)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(("kind", "location", "value"))
    out.writerow(("delta", repr(cert.argmax), repr(cert.delta)))
    out.writerow(("endpoint", repr(interval.lo), repr(cert.endpoints[0])))
    for loc, val in cert.extrema:
        out.writerow(("extremum", repr(loc), repr(val)))
    out.writerow(("endpoint", repr(interval.hi), repr(cert.endpoints[1])))
    if args.function:
        f = parse_function(args.function)
        try:
            bound = error_bound(f, ps, interval, max(ps.k, 1), 1.0, delta=cert.delta)
        except UnboundedAtZero as exc:
            print(f"bound({format_function(f)}) unavailable: {exc}", file=sys.stderr)
        else:
            # relative to ||b||_M
            out.writerow(("bound", format_function(f), repr(bound)))
    return EXIT_OK


def cmd_apply(args) -> int:
    op, interval = _operator_interval(args)
    b = _start_vector(op, args)
    f = parse_function(args.function)
    ps = _pole_set(args, interval, op, b)
    basis = build_basis(op, b, ps)
    u = apply_f(basis, f, b)
    write_vector(u, args.out)
    if args.check:
        err = m_norm(exact_apply(op, f, b) - u, op.M)
        bound = error_bound(f, ps, interval, max(ps.k, 1), m_norm(b, op.M))
        print(f"error = {err!r}  bound = {bound!r}", file=sys.stderr)
        if err > bound:
            print("certified bound violated", file=sys.stderr)
            return EXIT_FAILURE
    return EXIT_OK


def _forcing(items, n: int) -> list:
    out = []
    for item in items or ():
        deg, sep, path = item.partition(":")
        if not sep:
            raise UsageError(f"forcing term {item!r} must be 'degree:file'")
        v = read_vector(path)
        if v.shape != (n,):
            raise UsageError(f"forcing vector {path} has length {v.size}, operator has N = {n}")
        out.append((int(deg), v))
    return out


def cmd_fode(args) -> int:
    op, interval = _operator_interval(args)
    if args.u0:
        u0 = read_vector(args.u0)
        if u0.shape != (op.n,):
            raise UsageError(f"u0 has length {u0.size}, operator has N = {op.n}")
    else:
        u0 = _start_vector(op, args)
    forcing = _forcing(args.forcing, op.n)
    poles = None
    if args.mode == "rkm":
        poles = _pole_set(args, interval, op, u0)
    u = solve_fode(op, u0, forcing, args.alpha, args.s, args.t, mode=args.mode, poles=poles)
    write_vector(u, args.out)
    return EXIT_OK


def _sweep(kind: str, runner):
    def run(args) -> int:
        cfg = ex.parse_config(args.config)
        rows = runner(cfg)
        out = args.out or cfg.out
        text = ex.write_csv(rows, kind, out)
        if out is None:
            sys.stdout.write(text)
        bad = ex.bound_violations(rows)
        if bad:
            r = bad[0]
            print(
                f"{len(bad)} row(s) exceed the certified bound, e.g. strategy={r['strategy']} "
                f"k={r['k']} error={r['error']!r} bound={r['bound']!r}",
                file=sys.stderr,
            )
            return EXIT_FAILURE
        return EXIT_OK

    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracrk", description="Rational Krylov approximation of parametric fractional matrix functions."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poles", help="generate a pole set")
    _add_operator_args(p)
    _add_pole_args(p)
    p.add_argument("--out", help="pole file (default: print)")
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("certify", help="sup-norm certificate of a pole set")
    _add_operator_args(p)
    _add_pole_args(p)
    p.add_argument("--function", help="also print the error bound for this function")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("apply", help="rational Krylov approximation of f(L) b")
    _add_operator_args(p)
    _add_pole_args(p)
    p.add_argument("--function", required=True, help="pow:+s, pow:-s or ml:alpha=..,beta=..,t=..,s=..")
    p.add_argument("--vector", help="b (plain text or .mtx); default is a seeded random vector")
    p.add_argument("--out", help="output vector file (default: print)")
    p.add_argument("--check", action="store_true", help="compare against the eigendecomposition")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("fode", help="solution of the fractional evolution problem at time t")
    _add_operator_args(p)
    _add_pole_args(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--u0", help="initial value (plain text or .mtx)")
    p.add_argument("--forcing", action="append", metavar="DEG:FILE", help="forcing coefficient of t^DEG")
    p.add_argument("--mode", choices=("exact", "rkm"), default="exact")
    p.add_argument("--out", help="output vector file (default: print)")
    p.set_defaults(func=cmd_fode)

    for name, kind, runner, text in (
        ("paramstudy", "paramstudy", ex.run_paramstudy, "error over a parameter grid"),
        ("converge", "converge", ex.run_convergence, "error, certificate and bound against k"),
        ("certcmp", "certcmp", ex.run_certificates, "certificates of all strategies"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="sweep description (INI format)")
        p.add_argument("--out", help="CSV file (default: the config's output path, else stdout)")
        p.set_defaults(func=_sweep(kind, runner))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ex.ConfigError) as exc:
        print(f"fracrk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"fracrk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FactorizationError, ArithmeticError) as exc:
        print(f"fracrk: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
