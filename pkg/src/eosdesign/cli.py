"""Command-line interface: generate instances, solve, verify, compare families.

Report rows carry, in order: instance name, facility and customer counts,
total cost, the four cost shares, iteration count, cpu time, achieved gap,
open-facility count, and average open capacity; money prints at one decimal
and shares as whole percents. Exit codes: 0 when the solve reached the
tolerance, 2 when iteration-limited, 1 for usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .costfn import cost_function, default_capacity_range, linearize
from .evaluator import evaluate, oracle_optimum
from .instance import (FAMILIES, InstanceFormatError, canonical_family,
                       convert_holmberg, generate_instance, generate_suite,
                       read_instance, with_family, write_instance)
from .lagrangian import SolveReport, SolverConfig, solve

REPORT_HEADER = ("instance,facilities,customers,total_cost,opening_share,"
                 "serving_share,access_share,waiting_share,iterations,cpu_ms,"
                 "gap,open_facilities,avg_capacity")
COMPARE_HEADER = "instance,family,total_cost,waiting_share,open_facilities,avg_capacity"
TRACE_HEADER = "t,lower_bound,upper_bound,alpha,violation_norm"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _fmt_money(x: float) -> str:
    return f"{x:.1f}"


def _fmt_gap(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.3f}"


def _avg_capacity(report: SolveReport) -> float:
    sol = report.solution
    open_idx = np.flatnonzero(sol.open)
    return float(sol.capacity[open_idx].mean())


def report_row(name: str, n_fac: int, n_cust: int, report: SolveReport,
               cpu_ms: str) -> str:
    bd = report.breakdown
    shares = "%,".join(str(_round_half_up(s)) for s in bd.shares) + "%"
    return (f"{name},{n_fac},{n_cust},{_fmt_money(bd.total)},{shares},"
            f"{report.iterations},{cpu_ms},{_fmt_gap(report.final_gap)},"
            f"{int(report.solution.open.sum())},"
            f"{_round_half_up(_avg_capacity(report))}")


def report_json(name: str, n_fac: int, n_cust: int, report: SolveReport,
                with_time: bool) -> dict:
    bd = report.breakdown
    out = {
        "instance": name,
        "facilities": n_fac,
        "customers": n_cust,
        "total_cost": bd.total,
        "opening_share": bd.shares[0],
        "serving_share": bd.shares[1],
        "access_share": bd.shares[2],
        "waiting_share": bd.shares[3],
        "iterations": report.iterations,
        "gap": report.final_gap,
        "best_gap": report.best_gap,
        "lower_bound": report.final_lower_bound,
        "open_facilities": int(report.solution.open.sum()),
        "avg_capacity": _avg_capacity(report),
        "converged": report.converged,
        "stop_reason": report.stop_reason,
        "n_pieces": report.n_pieces,
    }
    if with_time:
        out["cpu_ms"] = report.wall_ms
    return out


def _append_csv(path: Path, header: str, rows: list[str]) -> None:
    new = not path.exists()
    with path.open("a", encoding="utf-8") as fh:
        if new:
            fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _add_range_flags(p: argparse.ArgumentParser) -> None:
    for flag, default in (("fixed-cost", (1000.0, 4000.0)), ("demand", (1.0, 20.0)),
                          ("access", (1.0, 30.0)), ("serving", (1.0, 5.0)),
                          ("waiting", (50.0, 300.0))):
        p.add_argument(f"--{flag}-range", nargs=2, type=float, default=list(default),
                       metavar=("LO", "HI"))
    p.add_argument("--access-mode", choices=("euclidean", "uniform"), default="euclidean",
                   help="euclidean: distances on a square; uniform: i.i.d. draws")
    p.add_argument("--area-side", type=float, default=8.0,
                   help="square side for euclidean access costs")
    p.add_argument("--operating-cost", type=float, default=None,
                   help="override the family's default operating cost")


def _range_kwargs(args) -> dict:
    return {
        "fixed_cost_range": tuple(args.fixed_cost_range),
        "demand_range": tuple(args.demand_range),
        "access_range": tuple(args.access_range),
        "serving_range": tuple(args.serving_range),
        "waiting_range": tuple(args.waiting_range),
        "access_mode": args.access_mode,
        "area_side": args.area_side,
        "operating_cost": args.operating_cost,
    }


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.01,
                   help="linearization relative error bound")
    p.add_argument("--tolerance", "-e", type=float, default=0.01, dest="tolerance",
                   help="stopping gap")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--alpha0", type=float, default=0.01)
    p.add_argument("--stall-window", type=int, default=10)
    p.add_argument("--stall-threshold", type=float, default=1e-6)
    p.add_argument("--norm", choices=("paper", "squared"), default="paper",
                   help="subgradient step divisor: violation norm or its square")
    p.add_argument("--lin-lo", type=float, default=None)
    p.add_argument("--lin-hi", type=float, default=None)
    p.add_argument("--parallel", type=int, default=1, metavar="N",
                   help="facility subproblem threads")
    p.add_argument("--seed", type=int, default=None)


def _config(args) -> SolverConfig:
    return SolverConfig(
        tolerance=args.tolerance, max_iters=args.max_iters, alpha0=args.alpha0,
        stall_window=args.stall_window, stall_threshold=args.stall_threshold,
        norm=args.norm, epsilon=args.epsilon, lin_lo=args.lin_lo, lin_hi=args.lin_hi,
        n_jobs=args.parallel, seed=args.seed)


def _write_trace(path: Path, report: SolveReport) -> None:
    lines = [TRACE_HEADER]
    for rec in report.trace:
        lines.append(f"{rec.t},{rec.lower_bound!r},{rec.upper_bound!r},"
                     f"{rec.alpha!r},{rec.violation_norm!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    ranges = _range_kwargs(args)
    if args.suite:
        outdir = Path(args.outdir or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        for inst in generate_suite(args.seed, args.family, **ranges):
            write_instance(inst, outdir / f"{inst.name}.inst")
        print(f"wrote 27 instances to {outdir}")
        return 0
    if args.facilities is None or args.customers is None:
        print("generate: need --facilities and --customers (or --suite paper)",
              file=sys.stderr)
        return 1
    inst = generate_instance(args.facilities, args.customers, args.seed,
                             args.family, name=args.name, **ranges)
    out = Path(args.out or f"{inst.name}.inst")
    write_instance(inst, out)
    print(f"wrote {out}")
    return 0


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    report = solve(inst, _config(args))
    cpu = str(_round_half_up(report.wall_ms)) if args.cpu_time else "-"
    row = report_row(inst.name, inst.n_facilities, inst.n_customers, report, cpu)
    if args.json:
        print(json.dumps(report_json(inst.name, inst.n_facilities, inst.n_customers,
                                     report, args.cpu_time), indent=2))
    else:
        print(REPORT_HEADER)
        print(row)
    if args.out:
        _append_csv(Path(args.out), REPORT_HEADER, [row])
    if args.trace:
        _write_trace(Path(args.trace), report)
    return 0 if report.final_gap <= args.tolerance else 2


def cmd_oracle(args) -> int:
    inst = read_instance(args.instance)
    fn = cost_function(inst.cost_family)
    if args.lin_lo is not None and args.lin_hi is not None:
        lo, hi = args.lin_lo, args.lin_hi
    else:
        lo, hi = default_capacity_range(
            fn, inst.total_demand, float(inst.waiting_costs.max()),
            float(inst.operating_costs.min()))
    lin = linearize(fn, args.epsilon, lo, hi)
    value, sol = oracle_optimum(inst, lin, exact_g=not args.linearized)
    bd = evaluate(inst, sol, exact_g=True) if not args.linearized else None
    kind = "linearized" if args.linearized else "exact"
    print(f"{kind} optimum of {inst.name}: {value!r}")
    print(f"open facilities: {np.flatnonzero(sol.open).tolist()}")
    print(f"assignment: {sol.assignment.tolist()}")
    print(f"capacities: {[round(c, 6) for c in sol.capacity.tolist()]}")
    if bd is not None:
        print(f"breakdown: opening={bd.opening!r} serving={bd.serving!r} "
              f"access={bd.access!r} waiting={bd.waiting!r}")
    return 0


def cmd_compare(args) -> int:
    rows = []
    for path in args.instances:
        base = read_instance(path)
        for family in FAMILIES:
            inst = with_family(base, family)
            report = solve(inst, _config(args))
            bd = report.breakdown
            rows.append(f"{inst.name},{family},{_fmt_money(bd.total)},"
                        f"{_round_half_up(bd.shares[3])}%,"
                        f"{int(report.solution.open.sum())},"
                        f"{_round_half_up(_avg_capacity(report))}")
    print(COMPARE_HEADER)
    for row in rows:
        print(row)
    if args.out:
        _append_csv(Path(args.out), COMPARE_HEADER, rows)
    return 0


def cmd_linearize_dump(args) -> int:
    fn = cost_function(args.family)
    lin = linearize(fn, args.epsilon, args.lo, args.hi)
    lines = ["k,tangent_point,breakpoint,slope,intercept"]
    for k, mu, b, slope, intercept in lin.rows():
        lines.append(f"{k},{mu!r},{b!r},{slope!r},{intercept!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def cmd_convert(args) -> int:
    inst = convert_holmberg(args.input, args.seed, args.family, name=args.name)
    write_instance(inst, args.output)
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eosdesign",
                     description="Economies-of-scale service system design solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="generate random instances")
    p.add_argument("--facilities", type=int, default=None)
    p.add_argument("--customers", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--family", type=canonical_family, default="linear")
    p.add_argument("--name", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--suite", choices=("paper",), default=None,
                   help="emit the 27-instance benchmark-shaped suite")
    p.add_argument("--outdir", default=None)
    _add_range_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one instance, print a report row")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.add_argument("--trace", default=None, metavar="PATH",
                   help="write per-iteration (t, lb, ub, alpha, ||v||) CSV")
    p.add_argument("--out", default=None, metavar="PATH",
                   help="append the report row to this CSV")
    p.add_argument("--json", action="store_true")
    p.add_argument("--cpu-time", action=argparse.BooleanOptionalAction, default=True,
                   help="report wall-clock ms (disable for byte-reproducible output)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="brute-force optimum (small instances only)")
    p.add_argument("instance")
    p.add_argument("--linearized", action="store_true",
                   help="optimize the tangent-envelope objective instead of exact g")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lin-lo", type=float, default=None)
    p.add_argument("--lin-hi", type=float, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="solve under all three cost families")
    p.add_argument("instances", nargs="+")
    _add_solver_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("linearize-dump", help="dump tangent pieces as CSV")
    p.add_argument("--family", type=canonical_family, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=1e4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_linearize_dump)

    p = sub.add_parser("convert", help="convert a legacy benchmark file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--family", type=canonical_family, default="linear")
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceFormatError, ValueError, OSError) as exc:
        print(f"eosdesign: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
