"""Command-line front end.

    vlsf channel     channel statistics (C, V, moments, cumulants)
    vlsf tail        approximation models over an n-grid, optionally with MC
    vlsf solve       one decoding-time schedule
    vlsf rate-curve  achievable rate vs. k for a list of m
    vlsf mc          Monte-Carlo check of a schedule file

All output is CSV on stdout (or ``--output``); summaries go to stderr.
Exit codes: 0 success, 1 solver/numeric failure, 2 usage error.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import MIN_ORDER, QuadratureError, build_channel, normalized_cumulants
from .montecarlo import default_shards, mc_stopping, mc_tail_curve
from .scheduler import (ProgramSpec, SolverError, greedy, n_m_star, rate_curve, sdo_gap, sdo_nogap,
                        vlf_bound)
from .tail import MODES, BracketError, TailModel

log = logging.getLogger("vlsf")


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.6g" % v


def fmt_time(v) -> str:
    return "%.4f" % v


def _samples(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError("samples must be a positive integer")
    return int(v)


def _int_list(text: str):
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")


def _add_channel_args(p):
    p.add_argument("--snr-db", type=float, default=0.2)


def _add_program_args(p, k=20, epsilon=1e-2):
    p.add_argument("--k", type=int, default=k, help="message bits (M = 2^k)")
    p.add_argument("--epsilon", type=float, default=epsilon)
    p.add_argument("--gamma", type=float, default=None, help="threshold in bits (default log2(2(2^k-1)/eps))")


def _add_model_args(p, default="hybrid", allow_all=False):
    choices = list(MODES) + (["all"] if allow_all else [])
    p.add_argument("--model", choices=choices, default=default)
    p.add_argument("--order", type=int, default=5, help="Edgeworth order (1..5)")


def _add_mc_args(p):
    p.add_argument("--samples", type=_samples, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=None, help="worker threads (default $VLSF_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlsf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-o", "--output", type=Path, default=None, help="write CSV here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel", help="capacity, dispersion, moments and cumulants")
    _add_channel_args(p)
    p.add_argument("--max-moment", type=int, default=MIN_ORDER)
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("tail", help="tail approximations over an n-grid")
    _add_channel_args(p)
    _add_program_args(p, k=10, epsilon=1e-2)
    _add_model_args(p, default="all", allow_all=True)
    p.add_argument("--n-min", type=float, default=1.0)
    p.add_argument("--n-max", type=float, default=150.0)
    p.add_argument("--n-step", type=float, default=1.0)
    p.add_argument("--with-mc", action="store_true", help="add F_mc and mc_stderr columns")
    _add_mc_args(p)
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("solve", help="compute one decoding-time schedule")
    _add_channel_args(p)
    _add_program_args(p)
    _add_model_args(p)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--solver", choices=("sdo-gap", "sdo-nogap", "greedy"), default="sdo-gap")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("rate-curve", help="rate vs. k sweep for several m")
    _add_channel_args(p)
    p.add_argument("--epsilon", type=float, default=1e-2)
    _add_model_args(p)
    p.add_argument("--k", type=_int_list, default=None, help="explicit k list, e.g. '10,20,30'")
    p.add_argument("--k-min", type=int, default=10)
    p.add_argument("--k-max", type=int, default=100)
    p.add_argument("--k-step", type=int, default=10)
    p.add_argument("--m", type=_int_list, default=[16], help="m list, e.g. '16,32'")
    p.add_argument("--solver", choices=("sdo-gap", "sdo-nogap", "greedy"), default="sdo-gap")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_rate_curve)

    p = sub.add_parser("mc", help="Monte-Carlo check of a schedule file")
    _add_channel_args(p)
    _add_program_args(p)
    p.add_argument("--schedule", type=Path, required=True, help="one time per line, '#' comments")
    _add_mc_args(p)
    p.set_defaults(func=cmd_mc)
    return parser


def _validate(parser, args):
    eps = getattr(args, "epsilon", None)
    if eps is not None and not 0.0 < eps < 1.0:
        parser.error("--epsilon must lie in (0, 1)")
    k = getattr(args, "k", None)
    if isinstance(k, int) and k < 1:
        parser.error("--k must be >= 1")
    if isinstance(k, list) and (not k or min(k) < 1):
        parser.error("--k entries must be >= 1")
    m = getattr(args, "m", None)
    if isinstance(m, int) and m < 1:
        parser.error("--m must be >= 1")
    if isinstance(m, list) and (not m or min(m) < 1):
        parser.error("--m entries must be >= 1")
    order = getattr(args, "order", None)
    if order is not None and not 1 <= order <= 5:
        parser.error("--order must lie in [1, 5]")
    if getattr(args, "samples", None) is not None and args.samples < 10_000:
        parser.error("--samples must be >= 1e4")
    if args.command == "channel" and args.max_moment < MIN_ORDER:
        parser.error(f"--max-moment must be at least {MIN_ORDER}")
    if args.command == "tail":
        if args.n_min <= 0 or args.n_step <= 0 or args.n_max < args.n_min:
            parser.error("need 0 < --n-min <= --n-max and --n-step > 0")
        if args.with_mc and (args.n_min != int(args.n_min) or args.n_step != int(args.n_step)):
            parser.error("--with-mc needs an integer grid")
    if args.command == "rate-curve" and (args.k_min < 1 or args.k_max < args.k_min or args.k_step < 1):
        parser.error("need 1 <= --k-min <= --k-max and --k-step >= 1")
    if args.command == "mc" and not args.schedule.is_file():
        parser.error(f"schedule file not found: {args.schedule}")
    if getattr(args, "shards", "unset") is None:
        args.shards = default_shards()


def _spec(args, m=1) -> ProgramSpec:
    return ProgramSpec(args.k, args.epsilon, args.snr_db, m, args.gamma)


def cmd_channel(args, out):
    ch = build_channel(args.snr_db, args.max_moment)
    kap = normalized_cumulants(ch, args.max_moment)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["snr_db", "capacity", "dispersion", "l", "moment", "cumulant"])
    for l in range(2, ch.max_order + 1):
        w.writerow([fmt(ch.snr_db), fmt(ch.capacity), fmt(ch.dispersion), l, fmt(ch.central_moments[l]), fmt(kap[l])])
    print(f"C = {ch.capacity:.6f} bits, V = {ch.dispersion:.6f} bits^2", file=sys.stderr)


def load_schedule(path: Path):
    times = []
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            times.append(float(line))
    return times


def cmd_tail(args, out):
    ch = build_channel(args.snr_db)
    spec = _spec(args)
    ns = np.arange(args.n_min, args.n_max + 0.5 * args.n_step, args.n_step)
    models = list(MODES) if args.model == "all" else [args.model]
    hybrid = TailModel(ch, spec.gamma, "hybrid", args.order)
    cols = {}
    for name in models:
        if name == "gaussian":
            cols["F_gaussian"] = hybrid.F_gaussian(ns)
        elif name == "edgeworth":
            cols["F_edgeworth"] = hybrid.F_edgeworth(ns)
        elif name == "petrov":
            cols["F_petrov"] = np.minimum(hybrid.F_petrov(ns), 1.0)
        else:
            cols["F_hybrid"] = hybrid.F(ns)
    if args.with_mc:
        est = mc_tail_curve(ns.astype(int), spec.gamma, ch, args.samples, args.seed, args.shards)
        cols["F_mc"] = [e.value for e in est]
        cols["mc_stderr"] = [e.stderr for e in est]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n"] + list(cols))
    for i, n in enumerate(ns):
        w.writerow([fmt(n)] + [fmt(float(c[i])) for c in cols.values()])
    print(f"gamma = {spec.gamma:.6g} bits, switch_n = {hybrid.switch_n:.6g}", file=sys.stderr)


def cmd_solve(args, out):
    ch = build_channel(args.snr_db)
    spec = _spec(args, args.m)
    tail = TailModel(ch, spec.gamma, args.model, args.order)
    solver = {"sdo-gap": sdo_gap, "sdo-nogap": sdo_nogap, "greedy": greedy}[args.solver]
    sched = solver(spec, tail)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["index", "time", "lambda"])
    lam = sched.multipliers
    for i, t in enumerate(sched.times, start=1):
        lv = fmt(lam[i - 1]) if lam is not None and i <= lam.size else ""
        w.writerow([i, fmt_time(t) if args.solver != "greedy" else str(int(t)), lv])
    e_tau, vlf_rate = vlf_bound(spec, ch)
    print(
        f"solver={args.solver} m={sched.m} n_m*={n_m_star(spec, tail):.4f} N={sched.objective:.6g} "
        f"rate={sched.rate:.6g} vlf_rate={vlf_rate:.6g} feasible={sched.feasible}",
        file=sys.stderr,
    )


def cmd_rate_curve(args, out):
    ks = args.k if args.k else list(range(args.k_min, args.k_max + 1, args.k_step))
    cells = rate_curve(ks, args.m, args.epsilon, args.snr_db, args.solver, args.model, args.order, jobs=args.jobs)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "m", "gamma", "n_m_star", "N", "rate", "vlf_rate", "ratio"])
    for c in cells:
        w.writerow([c.k, c.m, fmt(c.gamma), fmt(c.n_m_star), fmt(c.N), fmt(c.rate), fmt(c.vlf_rate), fmt(c.ratio)])
    failed = [c for c in cells if c.error]
    if failed:
        print(f"{len(failed)} cell(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_mc(args, out):
    ch = build_channel(args.snr_db)
    spec = _spec(args)
    times = load_schedule(args.schedule)
    if not times:
        raise ValueError("schedule file holds no decoding times")
    true, marg = mc_stopping(times, spec.gamma, ch, args.samples, args.seed, args.shards)
    tails = mc_tail_curve(np.round(times).astype(int), spec.gamma, ch, args.samples, args.seed, args.shards)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "estimate", "stderr", "samples", "seed"])
    for t, e in zip(times, tails):
        w.writerow([str(int(round(t))), fmt(e.value), fmt(e.stderr), e.samples, e.seed])
    for label, e in (("E_tau_true", true), ("E_tau_marginal", marg)):
        w.writerow([label, fmt(e.value), fmt(e.stderr), e.samples, e.seed])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    _validate(parser, args)
    try:
        if args.output:
            with open(args.output, "w", newline="") as fh:
                rc = args.func(args, fh)
        else:
            rc = args.func(args, sys.stdout)
    except (SolverError, BracketError, QuadratureError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
