"""Command-line front end.

Subcommands: airy, bounds, kernel, hsnorm, det, tail, sweep, fit, selftest.

Exit status: 0 success, 1 numerical failure (non-convergence, realness or bound
violation), 2 invalid arguments.

CSV columns
  bounds  x,T,value,envelope,ratio
  kernel  x,y,re,im
  sweep   s,T,tail,err
  fit     (--data) T,s,log_tail,log_envelope
Floats are written with 17 significant digits.  JSON output carries
"schema_version": 1.

Every subcommand accepts --config FILE (INI-style ``key = value`` lines under a
[run] section; flags on the command line win) and --dump-config, which prints
the effective configuration in the same format and exits.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _range(text):
    """'a:b:step' inclusive, or a comma list."""
    text = str(text)
    if ":" in text:
        a, b, h = (float(v) for v in text.split(":"))
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [a + i * h for i in range(n)]
    return _floats(text)


def _pos(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _g(v) -> str:
    return format(float(v), ".17g")


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style config file with a [run] section")
    common.add_argument("--dump-config", action="store_true", help="print effective config and exit")
    common.add_argument("--T0", type=_pos, default=1.0, help="reference time T0 (default 1)")
    common.add_argument("--out", default="-", help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = argparse.ArgumentParser(prog="crossover-tail", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("airy", parents=[common], help="deformed or classical Airy value")
    a.add_argument("--which", choices=("upper", "lower", "classical"), default="upper")
    a.add_argument("--x", type=float, required=True)
    a.add_argument("--T", type=_pos, default=1.0)
    a.add_argument("--derivative", action="store_true", help="classical only: Ai'(x)")
    a.add_argument("--abs-tol", type=_pos, default=1e-12)

    b = sub.add_parser("bounds", parents=[common], help="envelope constant scan")
    b.add_argument("--which", choices=("upper_all_x", "lower_pos_x", "lower_neg_x"), required=True)
    b.add_argument("--x", type=_range, default=None, help="x grid 'a:b:step' or list")
    b.add_argument("--T", type=_floats, default=[1.0, 8.0, 64.0])

    k = sub.add_parser("kernel", parents=[common], help="kernel values on an x-y grid")
    _spec_args(k)
    k.add_argument("--x", type=_floats, required=True)
    k.add_argument("--y", type=_floats, required=True)
    k.add_argument("--abs-tol", type=_pos, default=1e-12)

    h = sub.add_parser("hsnorm", parents=[common], help="HS norms of A1, A2")
    _spec_args(h)

    d = sub.add_parser("det", parents=[common], help="Fredholm determinant det(I - K)")
    _spec_args(d)
    d.add_argument("--nodes", type=int, default=16)
    d.add_argument("--det-tol", type=_pos, default=1e-8)
    d.add_argument("--node-cap", type=int, default=1024)

    for name, helptext in (("tail", "tail probability at one (s, T)"),
                           ("sweep", "tail probability on an (s, T) grid")):
        t = sub.add_parser(name, parents=[common], help=helptext)
        if name == "tail":
            t.add_argument("--T", type=_pos, required=True)
            t.add_argument("--s", type=float, required=True)
        else:
            t.add_argument("--T", type=_floats, required=True)
            t.add_argument("--s", type=_range, required=True)
        t.add_argument("--det-tol", type=_pos, default=1e-8)
        t.add_argument("--nodes", type=int, default=16)
        t.add_argument("--node-cap", type=int, default=256)
        t.add_argument("--delta", type=_pos, default=0.5)
        t.add_argument("--radius", type=_pos, default=0.5)
        t.add_argument("--truncation", type=_pos, default=40.0)
        t.add_argument("--method", choices=("split", "direct"), default="split")

    f = sub.add_parser("fit", parents=[common], help="envelope fit of a sweep CSV")
    f.add_argument("--in", dest="inp", required=True, help="sweep CSV (s,T,tail,err)")
    f.add_argument("--data", default=None, help="gnuplot data file of log-tail vs s per T")

    sub.add_parser("selftest", parents=[common], help="run the closed-form checks")
    return p


def _spec_args(p):
    p.add_argument("--T", type=_pos, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--mu-re", type=float, default=-1.0)
    p.add_argument("--mu-im", type=float, default=0.0)


_SKIP = {"config", "dump_config", "command"}


def _subparser(parser, command):
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[command]
    raise KeyError(command)


def _apply_config(parser, argv):
    """Parse argv; values from --config become defaults that explicit flags override."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(known.config) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if "run" not in cp:
        raise UsageError("config file needs a [run] section")
    try:
        sp = _subparser(parser, command)
    except KeyError:
        return parser.parse_args(argv)
    by_dest = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in cp["run"].items():
        dest = key.replace("-", "_")
        if dest == "command":
            if raw != command:
                raise UsageError(f"config is for {raw!r}, not {command!r}")
            continue
        if dest not in by_dest or dest in _SKIP:
            raise UsageError(f"unknown config key {key!r}")
        act = by_dest[dest]
        if isinstance(act, argparse._StoreTrueAction):
            val = cp["run"].getboolean(key)
        elif raw == "none":
            val = None
        else:
            try:
                val = act.type(raw) if act.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad value for {key}: {exc}") from exc
            if act.choices and val not in act.choices:
                raise UsageError(f"bad value for {key}: {raw!r}")
        defaults[dest] = val
        act.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def dump_config(args) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    run = {"command": args.command}
    for k, v in sorted(vars(args).items()):
        if k in _SKIP:
            continue
        if v is None:
            run[k] = "none"
        elif isinstance(v, bool):
            run[k] = "true" if v else "false"
        elif isinstance(v, list):
            run[k] = ",".join(_g(x) for x in v)
        elif isinstance(v, float):
            run[k] = _g(v)
        else:
            run[k] = str(v)
    cp["run"] = run
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- output helpers ------------------------------------------------------------

def _emit(args, text: str):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


def _json(payload: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **payload}, sort_keys=True, indent=2,
                      default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_g(v) for v in r))
    return "\n".join(lines) + "\n"


def _mu(args) -> complex:
    return complex(args.mu_re, args.mu_im)


# -- commands --------------------------------------------------------------------

def cmd_airy(args):
    from .deformed_airy import DeformedAiryParams, airy_classical, ai_lower_gamma, ai_upper_gamma
    if args.which == "classical":
        v = airy_classical(args.x, derivative=args.derivative)
        return _json({"which": "classical", "x": args.x, "derivative": args.derivative, "value": v})
    p = DeformedAiryParams.from_T(args.x, args.T)
    fn = ai_upper_gamma if args.which == "upper" else ai_lower_gamma
    r = fn(p, T0=args.T0, tol=args.abs_tol)
    return _json({"which": args.which, "x": args.x, "T": args.T, "value": r.value,
                  "imag_residual": r.imag_residual, "contour_case": r.contour_case,
                  "quad": {"abs_error_estimate": r.quad.abs_error_estimate,
                           "nodes_used": r.quad.nodes_used}})


def cmd_bounds(args):
    from .bounds import certify_envelope
    rep = certify_envelope(args.which, args.x, tuple(args.T), T0=args.T0, jobs=args.jobs)
    if args.format == "csv":
        return _csv(("x", "T", "value", "envelope", "ratio"), rep.rows)
    return _json(rep.to_dict())


def cmd_kernel(args):
    from .operator import KernelSpec, kernel_eval
    s = args.s
    if min(args.x + args.y) < s:
        raise UsageError("kernel arguments must be >= s")
    spec = KernelSpec(args.T, _mu(args), s, args.T0)
    rows = []
    for x in args.x:
        for y in args.y:
            v = kernel_eval(x, y, spec, args.abs_tol)
            rows.append((x, y, v.real, v.imag))
    if args.format == "json":
        return _json({"rows": [list(r) for r in rows]})
    return _csv(("x", "y", "re", "im"), rows)


def cmd_hsnorm(args):
    from .operator import KernelSpec, hs_norms
    return _json(hs_norms(KernelSpec(args.T, _mu(args), args.s, args.T0)).to_dict())


def cmd_det(args):
    from .fredholm import nystrom_det
    from .operator import KernelSpec
    r = nystrom_det(KernelSpec(args.T, _mu(args), args.s, args.T0), n=args.nodes,
                    det_tol=args.det_tol, n_max=args.node_cap)
    if not r.converged:
        _emit(args, _json(r.to_dict()))
        raise NumericFailure("determinant did not converge within the node cap")
    return _json(r.to_dict())


class NumericFailure(RuntimeError):
    pass


def _tail_kwargs(args):
    from .crossover import MuContourSpec
    return dict(mu_contour=MuContourSpec(args.delta, args.radius, args.truncation),
                det_tol=args.det_tol, n=args.nodes, n_max=args.node_cap,
                method=args.method, T0=args.T0)


def _tail_point(job):
    from .crossover import tail_probability_report
    s, T, kw = job
    r = tail_probability_report(s, T, **kw)
    return (s, T, r.value, r.err_estimate)


def cmd_tail(args):
    from .crossover import tail_probability_report
    r = tail_probability_report(args.s, args.T, **_tail_kwargs(args))
    return _json({"s": args.s, "T": args.T, **r.to_dict()})


def cmd_sweep(args):
    kw = _tail_kwargs(args)
    jobs = [(float(s), float(T), kw) for T in args.T for s in args.s]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_tail_point, jobs))
    else:
        rows = [_tail_point(j) for j in jobs]
    if args.format == "json":
        return _json({"rows": [list(r) for r in rows]})
    return _csv(("s", "T", "tail", "err"), rows)


def read_sweep_csv(path):
    import csv
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        need = {"s", "T", "tail"}
        if not rd.fieldnames or not need <= set(rd.fieldnames):
            raise UsageError(f"{path}: expected columns s,T,tail")
        return [(float(r["s"]), float(r["T"]), float(r["tail"])) for r in rd]


def cmd_fit(args):
    from .crossover import envelope, fit_tail_envelope
    try:
        samples = read_sweep_csv(args.inp)
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    fit = fit_tail_envelope(samples)
    if args.data:
        lines = ["# T s log_tail log_envelope"]
        for T in sorted({t for _, t, _ in samples}):
            for s, t, v in sorted(x for x in samples if x[1] == T):
                e = float(envelope(s, T, fit.c1, fit.c2, fit.c3))
                lines.append(" ".join(_g(q) for q in (T, s, math.log(v), math.log(e))))
            lines.append("")
            lines.append("")
        with open(args.data, "w") as fh:
            fh.write("\n".join(lines))
    return _json(fit.to_dict())


def selftest_checks():
    """(name, passed, detail) for each closed-form check."""
    from .contours import circle, integrate
    from .crossover import tail_probability_report  # noqa: F401 - import check
    from .deformed_airy import kappa
    from .fredholm import fredholm_det, half_line_grid
    from .operator import KernelSpec, mu_factor
    from .special import check_recip_gamma_envelope, gamma, recip_gamma

    out = []

    def chk(name, ok, detail=""):
        out.append((name, bool(ok), str(detail)))

    g = complex(gamma(1.5))
    chk("gamma(3/2) = sqrt(pi)/2", abs(g - math.sqrt(math.pi) / 2) < 1e-13, g)
    chk("gamma(1) = 1", abs(complex(gamma(1.0)) - 1) < 1e-14)
    chk("recip_gamma(-1) = 0", complex(recip_gamma(-1.0)) == 0)
    chk("recip_gamma(2) = 1", abs(complex(recip_gamma(2.0)) - 1) < 1e-14)
    r = check_recip_gamma_envelope((1, 1, 0, 0), 0.1)
    chk("envelope ratio at 1 is e^-2", abs(r.max_ratio - math.exp(-2)) < 1e-14, r.max_ratio)
    r = check_recip_gamma_envelope((2, 2, 0, 0), 0.1)
    chk("envelope ratio at 2 is e^-4", abs(r.max_ratio - math.exp(-4)) < 1e-14, r.max_ratio)
    q = integrate(circle(0j, 1.0), lambda z: 1.0 / z)
    chk("circle integral of 1/z = 2 pi i", abs(q.value - 2j * math.pi) < 1e-10, q.value)
    chk("kappa(2) = 1", abs(kappa(2.0) - 1.0) < 1e-15)
    m = complex(mu_factor(0.0, KernelSpec(2.0, -1.0, 0.0)))
    chk("mu-factor at mu=-1, t=0 is -1/2", abs(m + 0.5) < 1e-15, m)
    grid = half_line_grid(0.0, 32, 1.0)
    chk("zero kernel det = 1", fredholm_det(lambda x, y: 0.0 * x * y, grid) == 1)
    d = fredholm_det(lambda x, y: np.exp(-x) * np.exp(-y), grid)
    chk("rank-one det = 1/2", abs(d - 0.5) < 1e-8, d)
    return out


def cmd_selftest(args):
    checks = selftest_checks()
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({det})" if det and not ok else "")
             for name, ok, det in checks]
    if args.format == "json":
        text = _json({"checks": [{"name": n, "passed": ok} for n, ok, _ in checks]})
    else:
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    if not all(ok for _, ok, _ in checks):
        raise NumericFailure("selftest failed")
    return None


COMMANDS = {"airy": cmd_airy, "bounds": cmd_bounds, "kernel": cmd_kernel, "hsnorm": cmd_hsnorm,
            "det": cmd_det, "tail": cmd_tail, "sweep": cmd_sweep, "fit": cmd_fit,
            "selftest": cmd_selftest}

DEFAULT_FORMAT = {"kernel": "csv", "sweep": "csv", "bounds": "json", "selftest": "csv"}


def run(argv=None) -> int:
    from .bounds import EvaluationFailure
    from .contours import QuadratureError
    from .crossover import InfeasibleFit, TailConvergenceError, TailImagError
    from .deformed_airy import ImagResidualError
    from .fredholm import DetBoundViolation

    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.format is None:
        args.format = DEFAULT_FORMAT.get(args.command, "json")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.dump_config:
        sys.stdout.write(dump_config(args))
        return EXIT_OK
    numeric = (QuadratureError, TailConvergenceError, TailImagError, ImagResidualError,
               DetBoundViolation, EvaluationFailure, InfeasibleFit, NumericFailure)
    try:
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except numeric as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if text is not None:
        _emit(args, text)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
