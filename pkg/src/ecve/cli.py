"""Command line entry point.

Exit codes: 0 on success, 2 when the requested solve is infeasible, 1 on
any error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .catalog import build_scenario, load_config
from .harness import ResultRow, load_sweep, min_capacity, run_sweep, sig6, write_csv
from .oracle import oracle_solve, snap_to_grid
from .schemes import SCHEMES, SchemeOptions, solve
from .validation import InvalidArgumentError

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _global_flags(default):
    # accepted before or after the command; the sub-command copy must not
    # overwrite a value given up front, hence SUPPRESS there
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=default, help="random seed for restarts")
    common.add_argument("--out", default=default, help="write CSV here instead of stdout")
    common.add_argument("--step", type=float, default=default,
                        help="greedy rate step in Mbps (default 1/(T_d*n))")
    return common


def _parser():
    common = _global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="ecve", parents=[_global_flags(None)],
                                description="Secure edge caching and video encoding solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve one scenario")
    s.add_argument("config")
    s.add_argument("--scheme", choices=SCHEMES, default="ec-ve")

    w = sub.add_parser("sweep", parents=[common], help="run a sweep spec and emit CSV")
    w.add_argument("spec")

    m = sub.add_parser("min-capacity", parents=[common], help="smallest feasible capacity")
    m.add_argument("config")
    m.add_argument("--scheme", choices=SCHEMES, default="ec-ve")
    m.add_argument("--resolution", type=float, default=1.0, help="capacity resolution in Mb")

    o = sub.add_parser("oracle-check", parents=[common],
                       help="compare EC-VE and greedy with the exhaustive oracle")
    o.add_argument("config")
    o.add_argument("--grid", type=int, default=11, help="rate grid points per file")
    return p


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _options(args):
    return SchemeOptions.from_mapping({}, seed=args.seed, step=args.step)


def _cmd_solve(args):
    scenario = build_scenario(load_config(args.config))
    result = solve(scenario, args.scheme, _options(args))
    row = ResultRow.from_result("capacity", scenario.capacity[0], result)
    _emit(write_csv([row]), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def _cmd_sweep(args):
    spec = load_sweep(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    rows = run_sweep(spec, step=args.step)
    _emit(write_csv(rows), args.out)
    return EXIT_OK


def _cmd_min_capacity(args):
    config = load_config(args.config)
    cap = min_capacity(config, args.scheme, args.resolution, _options(args))
    text = "scheme,min_capacity_mb\n" + f"{args.scheme},{'' if cap is None else f'{cap:.6g}'}\n"
    _emit(text, args.out)
    return EXIT_OK if cap is not None else EXIT_INFEASIBLE


def _cmd_oracle_check(args):
    scenario = build_scenario(load_config(args.config))
    oracle = oracle_solve(scenario, args.grid)
    lines = ["scheme,status,Q,snapped_Q,oracle_Q"]
    oq = f"{oracle.Q:.6g}" if oracle.feasible else ""
    for scheme in ("ec-ve", "greedy-ec-ve"):
        res = solve(scenario, scheme, _options(args))
        snapped = snap_to_grid(scenario, res, args.grid)
        q = f"{sig6(res.Q):.6g}" if res.feasible else ""
        sq = f"{sig6(snapped.Q):.6g}" if snapped.feasible else ""
        lines.append(f"{scheme},{res.status},{q},{sq},{oq}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if oracle.feasible else EXIT_INFEASIBLE


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "min-capacity": _cmd_min_capacity,
    "oracle-check": _cmd_oracle_check,
}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which here means "infeasible"
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
