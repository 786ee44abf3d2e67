"""Command-line entry point: solve, train, simulate, sweep and validate."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .model import (ConfigError, NetworkConfig, load_config, sample_channels,
                    validate_schedule, weighted_throughput)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NODE_LIMIT = 0, 1, 2, 3
POLICIES = ("Milp", "MilpReduced", "QLearning", "Tdd", "Random")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _config(args) -> NetworkConfig:
    base = load_config(args.config) if args.config else NetworkConfig()
    if getattr(args, "n_intervals", None):
        base = base.replace(n_intervals=args.n_intervals)
    return base


def _channels(config: NetworkConfig, seed: int):
    return sample_channels(config, np.random.default_rng(seed))


def _print_schedule(schedule, config) -> None:
    print("slot mode downlink_msgs uplink_msgs energy_uJ")
    for t, dec in enumerate(schedule.decisions):
        mode = "D" if int(dec.mode) == 0 else "U"
        energy = " ".join(f"{e * 1e6:.3f}" for e in schedule.energy[t + 1])
        print(f"{t} {mode} {int(dec.downlink_count().sum())} "
              f"{int(dec.uplink_count().sum())} {energy}")
    print(f"weighted_throughput {weighted_throughput(schedule, config):.6g}")


def _cmd_solve(args) -> int:
    from .milp import export_lp_text, solve_horizon
    from .sim import save_schedule

    config = _config(args)
    channels = _channels(config, args.seed)
    sol = solve_horizon(config, channels, reduced=args.reduced, solver=args.solver,
                        node_limit=args.node_limit)
    res = sol.result
    if args.export_lp:
        export_lp_text(sol.model, args.export_lp)
    print(f"status {res.status}")
    print(f"objective {res.objective:.6g}")
    print(f"bound {res.bound:.6g}")
    print(f"nodes {res.nodes}")
    if sol.schedule is not None:
        _print_schedule(sol.schedule, config)
        if args.out:
            save_schedule(args.out, sol.schedule, channels, config)
    if res.status == "node_limit":
        print(f"node limit reached with gap {res.gap:.6g}", file=sys.stderr)
        return EXIT_NODE_LIMIT
    if res.status == "infeasible":
        return EXIT_INVALID
    return EXIT_OK


def _train_config(args, config):
    from .rl import TrainConfig

    return TrainConfig(steps=args.steps, decay=args.decay, seed=args.seed,
                       uplink="fixed" if args.fixed_order else "full")


def _cmd_train(args) -> int:
    from .rl import train

    config = _config(args)
    table = train(config, _train_config(args, config))
    if args.out:
        table.save(args.out)
    print(f"states {len(table)}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .milp import solve_horizon
    from .rl import QTable, train
    from .sim import Policy, ScheduleInvalid, run_episode, save_schedule

    config = _config(args)
    channels = _channels(config, args.seed)
    uplink = "fixed" if args.fixed_order else "full"
    name = args.policy
    if name in ("Milp", "MilpReduced"):
        sol = solve_horizon(config, channels, reduced=name == "MilpReduced", solver=args.solver)
        if sol.schedule is None:
            print(f"solver status {sol.result.status}", file=sys.stderr)
            return EXIT_NODE_LIMIT
        policy = Policy.milp(sol.schedule, name == "MilpReduced")
    elif name == "QLearning":
        tc = _train_config(args, config)
        table = QTable.load(args.table) if args.table else train(config, tc)
        policy = Policy.qlearning(table, tc)
    elif name == "Tdd":
        policy = Policy.tdd(uplink)
    else:
        policy = Policy.random(args.seed, uplink)
    try:
        schedule = run_episode(policy, config, channels)
    except ScheduleInvalid as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    _print_schedule(schedule, config)
    if args.out:
        save_schedule(args.out, schedule, channels, config)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .sim import ExperimentSpec, run_sweep, summarize

    spec = ExperimentSpec.load(args.spec)
    if args.config:
        spec.base = load_config(args.config)
    if args.runs is not None:
        spec.runs = args.runs
    if args.seed is not None:
        spec.seed_base = args.seed
    if args.policy:
        spec.policies = list(args.policy)
    if args.fixed_order:
        spec.fixed_order = True
    if args.steps is not None:
        spec.train_steps = args.steps
    spec.__post_init__()
    rows = run_sweep(spec, args.out, timing=not args.no_timing)
    for (policy, value), mean in summarize(rows).items():
        print(f"{policy} {spec.param}={value:g} mean={mean:.4f}")
    print(f"rows {len(rows)}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .sim import load_schedule

    schedule, channels, config = load_schedule(args.schedule)
    report = validate_schedule(schedule, channels, config)
    for v in report.violations:
        print(f"violation: {v}")
    for v in report.advisories:
        print(f"advisory: {v}")
    if not report.ok:
        return EXIT_INVALID
    print(f"valid, weighted_throughput {weighted_throughput(schedule, config):.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wprsma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed_default=0):
        p.add_argument("--config", metavar="PATH", help="network config JSON")
        p.add_argument("--seed", type=int, default=seed_default, metavar="N")
        p.add_argument("--out", metavar="PATH")

    def learning(p):
        p.add_argument("--steps", type=int, default=200_000, help="training slot-steps")
        p.add_argument("--decay", type=float, default=1e-5, help="epsilon decrement per slot")
        p.add_argument("--fixed-order", action="store_true",
                       help="uplink uses the gain-sorted decoding order only")

    p = sub.add_parser("solve", help="solve the horizon MILP for one channel draw")
    common(p)
    p.add_argument("--reduced", action="store_true", help="use the reduced order set")
    p.add_argument("--solver", choices=("bnb", "highs"), default="bnb")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--n-intervals", type=int, help="harvester intervals")
    p.add_argument("--export-lp", metavar="PATH", help="write the model in LP format")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("train", help="train a Q-table and dump it as JSON")
    common(p)
    learning(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("simulate", help="run one episode under a policy")
    common(p)
    learning(p)
    p.add_argument("--policy", choices=POLICIES, default="Tdd")
    p.add_argument("--table", metavar="PATH", help="pre-trained Q-table for QLearning")
    p.add_argument("--solver", choices=("bnb", "highs"), default="highs")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run an experiment spec and write CSV")
    p.add_argument("spec", metavar="SPEC", help="experiment spec JSON")
    p.add_argument("--config", metavar="PATH", help="override the base config")
    p.add_argument("--seed", type=int, metavar="N", help="override the seed base")
    p.add_argument("--runs", type=int, metavar="N")
    p.add_argument("--policy", action="append", choices=POLICIES,
                   help="restrict to these policies (repeatable)")
    p.add_argument("--fixed-order", action="store_true")
    p.add_argument("--steps", type=int, help="override training slot-steps")
    p.add_argument("--no-timing", action="store_true",
                   help="write zero wall times for byte-reproducible output")
    p.add_argument("--out", metavar="PATH", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="recheck a schedule file")
    p.add_argument("schedule", metavar="PATH")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"wprsma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
