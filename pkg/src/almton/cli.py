"""Command line entry point: ``almton {grid,stress,profile,audit,check-derivs}``.

Every option can also come from a ``key=value`` config file (``--config``);
flags given on the command line win.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .diagnostics import audit_run, estimate_bounds
from .problems import REGISTRY, get_problem
from .results import LEDGER_FIELDS
from .solver import AlmtonConfig, run
from .tensors import fd_check

FD_TOLS = (1e-6, 1e-5, 1e-4)


def csv_list(text: str) -> list[str]:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def read_config(path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="almton", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key=value file supplying option defaults")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solvers=True):
        p.add_argument("--epsilon", type=float, help="gradient-norm tolerance")
        p.add_argument("--budget", type=int, help="iteration budget per run")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output CSV path")
        if solvers:
            p.add_argument("--solvers", type=csv_list,
                           default="almton-simple,almton-heuristic,damped-newton",
                           help=f"comma list from: {', '.join(bench.SOLVERS)}")

    g = sub.add_parser("grid", help="grid of starting points on one or more problems")
    common(g)
    g.add_argument("--problem", type=csv_list, default="himmelblau",
                   help="comma list of problem names")
    g.add_argument("--counts", type=int_list, default="30,30")
    g.add_argument("--metric", choices=bench.METRICS, default="iterations")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--svg", help="also write the performance profile here")
    g.set_defaults(epsilon=1e-8, budget=100)

    s = sub.add_parser("stress", help="Rosenbrock stress protocol")
    common(s)
    s.add_argument("--n", type=int_list, default="5")
    s.add_argument("--perturbed", type=int, default=10)
    s.set_defaults(epsilon=1e-6, budget=1000,
                   solvers="almton-simple,newton-cg,lbfgs")

    p = sub.add_parser("profile", help="performance profile from record CSVs")
    p.add_argument("--records", type=csv_list, required=True)
    p.add_argument("--out", help="tau/rho CSV path")
    p.add_argument("--svg", help="SVG chart path")
    p.add_argument("--title", default="performance profile")

    a = sub.add_parser("audit", help="run ALMTON once and audit the bounds")
    common(a, solvers=False)
    a.add_argument("--problem", default="rosenbrock2")
    a.add_argument("--x0", type=float_list, help="start point (default: box centre)")
    a.add_argument("--strategy", choices=("simple", "heuristic"), default="simple")
    a.set_defaults(epsilon=1e-8, budget=100)

    c = sub.add_parser("check-derivs", help="finite-difference checks of analytic problems")
    c.add_argument("--problem", type=csv_list,
                   default=",".join(["rosenbrock2", "rosenbrock5", *REGISTRY]))
    c.add_argument("--points", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--h", type=float, default=1e-5)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv) -> list[str]:
    """Push config-file values in as parser defaults for the chosen subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        values = read_config(known.config)
    except OSError as exc:
        ap.error(f"cannot read config {known.config}: {exc}")
    except ValueError as exc:
        ap.error(str(exc))
    subs = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    cmd = next((t for t in argv if t in subs.choices), None)
    if cmd is None:
        return argv
    sp = subs.choices[cmd]
    dests = {a.dest for a in sp._actions}
    unknown = sorted(set(values) - dests)
    if unknown:
        ap.error(f"config keys not valid for '{cmd}': {', '.join(unknown)}")
    sp.set_defaults(**values)
    # argparse only converts string defaults for options that are absent
    for action in sp._actions:
        if action.dest in values and action.type is not None:
            try:
                sp.set_defaults(**{action.dest: action.type(values[action.dest])})
            except (ValueError, argparse.ArgumentTypeError) as exc:
                ap.error(f"config value for {action.dest}: {exc}")
    return argv


def _solvers(ap, names):
    bad = [n for n in names if n not in bench.SOLVERS]
    if bad:
        ap.error(f"unknown solver(s) {bad}; known: {sorted(bench.SOLVERS)}")
    return names


def cmd_grid(ap, args) -> int:
    solvers = _solvers(ap, args.solvers)
    records = []
    for name in args.problem:
        try:
            spec = bench.GridSpec(name, tuple(args.counts), budget=args.budget,
                                  epsilon=args.epsilon)
        except ValueError as exc:
            ap.error(str(exc))
        records += bench.run_grid(spec, solvers, args.metric, args.workers)
    if args.out:
        bench.write_records_csv(records, args.out)
    curves = bench.performance_profile(records)
    for cv in curves:
        print(f"{cv.solver:<18} success {cv.success_fraction:6.1%}  rho(1) {cv.at(1.0):6.1%}")
    if args.svg:
        bench.write_profile_svg(curves, args.svg, f"profile ({args.metric})")
    return 0


def cmd_stress(ap, args) -> int:
    solvers = _solvers(ap, args.solvers)
    rows = []
    for n in args.n:
        if n < 2:
            ap.error("Rosenbrock dimension must be at least 2")
        rows += bench.stress_protocol(n, solvers, args.perturbed, args.epsilon, args.budget)
    print(bench.format_stress(rows))
    if args.out:
        bench.write_rows_csv([{"solver": r.solver, "n": r.n, "trials": r.trials,
                               "successes": r.successes,
                               "median_iterations": r.median_iterations,
                               "median_f_evals": r.median_f_evals,
                               "median_time": r.median_time} for r in rows], args.out)
    return 0


def cmd_profile(ap, args) -> int:
    records = []
    for path in args.records:
        try:
            records += bench.read_records_csv(path)
        except (OSError, ValueError) as exc:
            ap.error(str(exc))
    try:
        curves = bench.performance_profile(records)
    except ValueError as exc:
        ap.error(str(exc))
    for cv in curves:
        print(f"{cv.solver:<18} success {cv.success_fraction:6.1%}  rho(1) {cv.at(1.0):6.1%}")
    if args.out:
        bench.write_rows_csv(bench.profile_rows(curves), args.out)
    if args.svg:
        bench.write_profile_svg(curves, args.svg, args.title)
    return 0


def cmd_audit(ap, args) -> int:
    try:
        prob = get_problem(args.problem)
    except ValueError as exc:
        ap.error(str(exc))
    x0 = np.asarray(args.x0 if args.x0 else 0.5 * (prob.lo + prob.hi), dtype=float)
    if x0.shape != (prob.n,):
        ap.error(f"--x0 needs {prob.n} values")
    cfg = AlmtonConfig(epsilon=args.epsilon, max_iter=args.budget, strategy=args.strategy)
    res = run(prob, x0, cfg)
    print(f"{res.solver}: {res.status} after {res.counts.iterations} iterations, "
          f"|grad| = {res.grad_norm:.3e}")
    bounds = estimate_bounds(res, prob, cfg)
    report = audit_run(res.ledger, bounds, cfg)
    print(report.text())
    if args.out:
        rows = [{k: v for k, v in r.as_row().items()} for r in res.ledger]
        for row in rows:
            row["x"] = " ".join(repr(v) for v in row["x"])
        bench.write_rows_csv(rows or [dict.fromkeys(LEDGER_FIELDS, "")], args.out)
        bench.write_rows_csv(report.rows(), args.out, mode="a")
    return 0


def cmd_check_derivs(ap, args) -> int:
    rng = np.random.default_rng(args.seed)
    worst_fail = False
    for name in args.problem:
        try:
            prob = get_problem(name)
        except ValueError as exc:
            ap.error(str(exc))
        errs = np.zeros(3)
        for x in prob.sample(rng, args.points):
            rep = fd_check(prob.evaluate(x), prob.evaluate, args.h)
            errs = np.maximum(errs, [rep.gradient, rep.hessian, rep.tensor])
        ok = bool(np.all(errs <= FD_TOLS))
        worst_fail |= not ok
        print(f"{name:<20} grad {errs[0]:.2e}  hess {errs[1]:.2e}  tensor {errs[2]:.2e}  "
              f"{'PASS' if ok else 'FAIL'}")
    return 1 if worst_fail else 0


COMMANDS = {"grid": cmd_grid, "stress": cmd_stress, "profile": cmd_profile,
            "audit": cmd_audit, "check-derivs": cmd_check_derivs}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    argv = _apply_config(ap, argv)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](ap, args)
    except ValueError as exc:
        ap.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
