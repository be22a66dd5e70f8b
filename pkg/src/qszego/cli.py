"""Command-line scenario runner.

Usage: qszego SCENARIO [--config PATH] [--seed N] [--out DIR]
       [--budget-scale F], or qszego --list-scenarios.
Exit code 0 iff every check in the scenario passed.  QSK_THREADS caps
intra-scenario parallelism.
"""

import argparse
import json
import sys

from .experiments import SCENARIOS, ConfigError, emit_report, run_scenario, validate_config


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qszego",
        description="Reproducible numerical experiments for the boundary singular-integral toolkit.",
    )
    parser.add_argument("--list-scenarios", action="store_true", help="list scenario names and exit")
    sub = parser.add_subparsers(dest="scenario")
    for name in sorted(SCENARIOS):
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", default=None, help="path to a JSON run configuration")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="output directory (CSV + JSON summary)")
        sp.add_argument(
            "--budget-scale", type=float, default=None, help="uniformly scale all sample budgets"
        )
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_scenarios:
        for name in sorted(SCENARIOS):
            print(name)
        return 0
    if not args.scenario:
        parser.print_usage(sys.stderr)
        return 2
    raw = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    raw["scenario"] = args.scenario
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.budget_scale is not None:
        raw["budget_scale"] = args.budget_scale
    if args.out is not None:
        raw["out_dir"] = args.out
    try:
        config = validate_config(raw)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    report = run_scenario(config)
    for check in report.checks:
        flag = "PASS" if check["pass"] else "FAIL"
        print(f"[{flag}] {check['name']} = {check['value']} (op={check['op']}, tol={check['tolerance']})")
    if config.out_dir:
        manifest = emit_report(report, config.out_dir)
        print(f"report written to {manifest['dir']}")
    return 0 if report.all_pass else 1


if __name__ == "__main__":
    raise SystemExit(main())
