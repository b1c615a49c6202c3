"""Command-line entry point.

    python -m sgbs <command> --config cfg.json [--seed S] [--budget B] [--out DIR] [--set key=value ...]

Exit status: 0 on success, 2 on a configuration error, 3 if any method diverged.
The worker count comes from the SGBS_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..policy import Divergence
from ..problems import InstanceFormatError
from . import commands
from .config import ConfigError, load

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

COMMANDS = {
    "generate": commands.cmd_generate,
    "pretrain": commands.cmd_pretrain,
    "solve": commands.cmd_solve,
    "compare": commands.cmd_compare,
    "sweep": commands.cmd_sweep,
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw  # bare strings need no quoting
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgbs", description="Desk-scale SGBS / EAS experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="global seed")
        p.add_argument("--budget", type=int, help="candidate solutions per instance and method")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (JSON value)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        overrides = _parse_set(args.set)
        overrides.update({"seed": args.seed, "budget": args.budget, "out": args.out})
        cfg = load(args.config, overrides)
        commands.worker_count()
        result = COMMANDS[args.command](cfg)
    except (ConfigError, InstanceFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Divergence as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if args.command in ("solve", "compare"):
        for label, s in result["summary"].items():
            cost = "n/a" if s["mean_cost"] is None else f"{s['mean_cost']:.6f}"
            gap = "n/a" if s["mean_gap_pct"] is None else f"{s['mean_gap_pct']:.3f}%"
            print(f"{label:<16} mean cost {cost}  gap {gap}  diverged {s['diverged']}")
        if commands.diverged_count(result):
            return EXIT_DIVERGED
    elif args.command == "sweep":
        for b, g, cost, rollouts, _ in result:
            print(f"beta={b:<3} gamma={g:<3} mean cost {cost:.6f}  rollouts {rollouts:.1f}")
    elif args.command == "pretrain":
        print(f"selected epoch {result['selected_epoch']}")
    else:
        print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
