"""Command-line interface.

    persuade run <config> [--out DIR]
    persuade counterexample --eps E --delta D --lambda L [--grid-h H] [--out DIR]
    persuade solve <config> --out TABLE
    persuade greedy-split --r R0,R1,... --p P0,P1,...

Exit codes: 0 when every verdict passes, 1 when any fails, 2 on usage or
configuration errors.  PERSUADE_WORKERS caps the simulation worker count
(default: available parallelism).
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .exceptions import PersuadeError
from .experiments import counterexample_instance, fmt, run_experiment
from .greedy import greedy_split
from .model import Belief, PayoffStructure
from .value_iteration import DEFAULT_EPS, DEFAULT_RESOLUTION, SimplexGrid, solve


def _vector(text: str, name: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise PersuadeError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_experiment(cfg)
    report.write(args.out)
    sys.stdout.write(report.human_text())
    return 0 if report.passed else 1


def _cmd_counterexample(args) -> int:
    cfg = counterexample_instance(args.eps, args.delta, args.lam)
    if args.grid_h is not None:
        cfg.grid_n = int(round(1.0 / args.grid_h))
    report = run_experiment(cfg)
    report.write(args.out)
    sys.stdout.write(report.human_text())
    return 0 if report.passed else 1


def _cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    payoffs, chain = cfg.payoffs(), cfg.chain()
    if payoffs.dim not in (2, 3):
        raise PersuadeError("solve supports 2- or 3-state instances")
    n = cfg.grid_n or DEFAULT_RESOLUTION[payoffs.dim]
    grid = SimplexGrid(payoffs.dim, n)
    result = solve(cfg.delta, chain, payoffs, grid, DEFAULT_EPS[payoffs.dim])
    header = [f"p{i}" for i in range(payoffs.dim)] + ["V"]
    lines = [",".join(header)]
    for i in range(grid.n_nodes):
        row = list(grid.nodes[i]) + [result.field.values[i]]
        lines.append(",".join(fmt(x) for x in row))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"solved in {result.iterations} sweeps, final diff {result.final_diff:.3e}; "
          f"table written to {args.out}")
    return 0


def _cmd_greedy_split(args) -> int:
    r = _vector(args.r, "--r")
    p = _vector(args.p, "--p")
    if len(r) != len(p):
        raise PersuadeError("--r and --p must have the same length")
    split = greedy_split(Belief(p), PayoffStructure(r))
    print(f"a_I = {fmt(split.a_I)}")
    print("q_I = " + ("indeterminate" if split.q_I is None
                      else ",".join(fmt(x) for x in split.q_I)))
    print(f"a_J = {fmt(split.a_J)}")
    print("q_J = " + ("indeterminate" if split.q_J is None
                      else ",".join(fmt(x) for x in split.q_J)))
    print(f"k_star = {split.k_star if split.k_star is not None else 'invest'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="persuade",
        description="Optimal dynamic information provision: solver and experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("config", help="path to a JSON config file")
    p_run.add_argument("--out", default="persuade_out", help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_ce = sub.add_parser("counterexample", help="run the greedy-suboptimality instance")
    p_ce.add_argument("--eps", type=float, default=0.01)
    p_ce.add_argument("--delta", type=float, default=0.5)
    p_ce.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p_ce.add_argument("--grid-h", type=float, default=None)
    p_ce.add_argument("--out", default="persuade_out")
    p_ce.set_defaults(func=_cmd_counterexample)

    p_solve = sub.add_parser("solve", help="solve the value on a simplex grid")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", required=True, help="output CSV table")
    p_solve.set_defaults(func=_cmd_solve)

    p_gs = sub.add_parser("greedy-split", help="print the closed-form greedy splitting")
    p_gs.add_argument("--r", required=True, help="comma-separated payoffs")
    p_gs.add_argument("--p", required=True, help="comma-separated belief weights")
    p_gs.set_defaults(func=_cmd_greedy_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PersuadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
