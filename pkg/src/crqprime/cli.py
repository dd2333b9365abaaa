"""Command-line interface.

Usage::

    crqprime invariants DOMAIN.yaml [--grid N] [--degree D] [--tol T] [--out PREFIX]
    crqprime variation FAMILY.yaml  [--step h] [--t0 t] [--grid N] [--out PREFIX]
    crqprime renorm DOMAIN.yaml     [--eps "e1,e2,..."] [--grid N] [--radial K] [--out PREFIX]
    crqprime hessian DIRECTION.yaml [--step h] [--grid N] [--out PREFIX]
    crqprime transform DOMAIN.yaml MAP.yaml [--out FILE]
    crqprime selftest

Reports are JSON (``PREFIX.json``) plus a per-point CSV for ``invariants``;
without ``--out`` the JSON goes to standard output.  Outputs are written only
after the whole computation succeeded.

Exit codes: 0 success, 2 parse error, 3 geometry (pseudoconvexity, star
shape), 4 numeric (tolerance, convergence), 1 other library errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CRQError, NumericError, ParseError

DEFAULTS = {
    "grid": 8,
    "degree": None,
    "tol": 1e-6,
    "eps": "0.05,0.035,0.025,0.018,0.013,0.009,0.0065,0.0045,0.0032,0.0023,0.0016,0.0012",
    "step": 0.04,
    "threads": None,
}


# ---------------------------------------------------------------------------
# helpers


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-" + path.name)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, complex):
            return [o.real, o.imag]
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _emit(args, report: dict, extra_files: dict | None = None):
    """Write all outputs at once; everything is rendered before the first write."""
    files = {}
    text = _json(report)
    if args.out:
        files[Path(str(args.out) + ".json")] = text
        for suffix, content in (extra_files or {}).items():
            files[Path(str(args.out) + suffix)] = content
        for path, content in files.items():
            _atomic_write(path, content)
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",) and v is not None}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}


def _positive_int(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}")
        return v

    return parse


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _eps_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("eps must be a comma-separated list of numbers") from None
    if len(vals) < 7:
        raise argparse.ArgumentTypeError("need at least 7 eps values for the fit")
    if any(v <= 0 for v in vals) or any(b >= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("eps values must be positive and strictly decreasing")
    return vals


def _set_threads(args):
    if getattr(args, "threads", None):
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# commands


def cmd_invariants(args):
    from .domains import levi_precheck, load_domain
    from .quadrature import total_q_prime

    domain = load_domain(args.domain)
    levi_precheck(domain)
    rep = total_q_prime(domain, args.grid, args.degree, obstruction=True,
                        convergence_grid=args.check_grid, keep_points=True)
    if rep.convergence is not None and rep.convergence > args.tol * max(1.0, abs(rep.total_q_prime)):
        raise NumericError(
            f"grid convergence {rep.convergence:.3e} exceeds tolerance; increase --grid")
    pp = rep.per_point
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_z1", "im_z1", "re_z2", "im_z2", "q_prime", "scal", "norm_a2",
                "obstruction", "weight"])
    for i in range(len(pp["points"])):
        z = pp["points"][i]
        w.writerow([repr(float(v)) for v in (z[0].real, z[0].imag, z[1].real, z[1].imag,
                                             pp["q_prime"][i], pp["scal"][i], pp["norm_a2"][i],
                                             pp["obstruction"][i], pp["weight"][i])])
    report = {"command": "invariants", "config": _config(args), "version": __version__,
              "report": rep.to_dict()}
    _emit(args, report, {".csv": buf.getvalue()})
    print(f"total Q' = {rep.total_q_prime:.12g}  (grid {rep.grid}, "
          f"convergence {rep.convergence})", file=sys.stderr)
    return 0


def cmd_variation(args):
    from .domains import load_family
    from .quadrature import variation_check

    fam = load_family(args.family)
    rep = variation_check(fam, args.step, args.grid, args.t0, args.degree)
    report = {"command": "variation", "config": _config(args), "version": __version__,
              "report": rep.to_dict()}
    _emit(args, report)
    print(f"dQ/dt = {rep.richardson:.10g}, rhs = {rep.rhs:.10g}, order = {rep.order:.3f}",
          file=sys.stderr)
    return 0


def cmd_renorm(args):
    from .domains import levi_precheck, load_domain
    from .quadrature import renorm_volume

    domain = load_domain(args.domain)
    levi_precheck(domain)
    fit = renorm_volume(domain, args.eps, args.radial, args.grid)
    report = {"command": "renorm", "config": _config(args), "version": __version__,
              "report": fit.to_dict()}
    _emit(args, report)
    print(f"log coefficient = {fit.log_coeff:.10g}, residual = {fit.residual:.3e}",
          file=sys.stderr)
    return 0


def cmd_hessian(args):
    from .domains import load_direction
    from .quadrature import hessian_probe

    name, sigma = load_direction(args.direction)
    rep = hessian_probe(sigma, args.step, args.grid, args.degree)
    report = {"command": "hessian", "direction": name, "config": _config(args),
              "version": __version__, "report": rep.to_dict()}
    _emit(args, report)
    print(f"second difference = {rep.richardson:.6g} +- {rep.noise_floor:.2g} "
          f"(sign {rep.sign})", file=sys.stderr)
    return 0


def cmd_transform(args):
    from .domains import dump_domain, load_domain, load_map, transform

    domain = load_domain(args.domain)
    phi = load_map(args.map)
    out = transform(domain, phi)
    text = dump_domain(out)
    if args.out:
        _atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_selftest(args):
    from .selftest import run_selftest

    ok = run_selftest(verbose=True)
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crqprime",
                                description="CR Q-prime curvature and obstruction of domains in C^2")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True):
        if grid:
            sp.add_argument("--grid", type=_positive_int(4), default=DEFAULTS["grid"],
                            help="Gauss-Legendre nodes in eta (xi uses 2N) [default: %(default)s]")
        sp.add_argument("--degree", type=_positive_int(1), default=DEFAULTS["degree"],
                        help="Taylor degree of rho jets (default: per-quantity budget + 1)")
        sp.add_argument("--threads", type=_positive_int(1), default=DEFAULTS["threads"],
                        help="numba worker threads")
        sp.add_argument("--out", type=Path, default=None,
                        help="output prefix; PREFIX.json (and .csv) are written")

    s = sub.add_parser("invariants", help="total Q', pointwise invariants and obstruction")
    s.add_argument("domain", type=Path)
    common(s)
    s.add_argument("--tol", type=_positive_float, default=DEFAULTS["tol"],
                   help="relative grid-convergence tolerance [default: %(default)s]")
    s.add_argument("--check-grid", type=int, default=None,
                   help="grid for the convergence estimate (default 2N, 0 disables)")
    s.set_defaults(func=cmd_invariants)

    s = sub.add_parser("variation", help="first-variation identity along a family")
    s.add_argument("family", type=Path)
    common(s)
    s.add_argument("--step", type=_positive_float, default=DEFAULTS["step"],
                   help="largest finite-difference step [default: %(default)s]")
    s.add_argument("--t0", type=float, default=0.0, help="base parameter")
    s.set_defaults(func=cmd_variation)

    s = sub.add_parser("renorm", help="renormalized volume expansion")
    s.add_argument("domain", type=Path)
    common(s)
    s.set_defaults(grid=6)
    s.add_argument("--eps", type=_eps_list, default=_eps_list(DEFAULTS["eps"]),
                   help="comma-separated decreasing eps values")
    s.add_argument("--radial", type=_positive_int(6), default=16,
                   help="Chebyshev nodes per ray [default: %(default)s]")
    s.set_defaults(func=cmd_renorm)

    s = sub.add_parser("hessian", help="second variation of total Q' at the unit ball")
    s.add_argument("direction", type=Path)
    common(s)
    s.add_argument("--step", type=_positive_float, default=0.1,
                   help="finite-difference step [default: %(default)s]")
    s.set_defaults(func=cmd_hessian)

    s = sub.add_parser("transform", help="image of a domain under a polynomial automorphism")
    s.add_argument("domain", type=Path)
    s.add_argument("map", type=Path)
    s.add_argument("--out", type=Path, default=None, help="output domain file")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("selftest", help="fast consistency checks and convention ledger")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except CRQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ParseError.exit_code if isinstance(exc, ValueError) else 1
    print(f"done in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
