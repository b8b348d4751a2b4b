"""Command-line experiment runner.

    episcale run <config-file> [--out DIR] [--seed S] [--threads K]
    episcale validate <config-file>
    episcale list-scenarios

Exit codes: 0 success, 1 validation failure, 2 runtime assertion failure.
EPISCALE_THREADS is honored when --threads is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from episcale.config import SCENARIOS, ConfigError, validate_config
from episcale.scenarios import run_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="episcale", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario from a config file")
    run_p.add_argument("config", help="path to a key = value config file")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker threads for ensemble realizations")

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("config", help="path to a key = value config file")

    sub.add_parser("list-scenarios", help="list available scenarios")
    return parser


def _load(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return validate_config(fh.read())


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(name)
        return EXIT_OK

    try:
        cfg = _load(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "validate":
        print(f"ok: scenario {cfg.scenario}")
        return EXIT_OK

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    threads = args.threads
    if threads is None:
        env = os.environ.get("EPISCALE_THREADS")
        threads = int(env) if env else None
    if threads is not None:
        cfg = replace(cfg, threads=max(1, threads))

    try:
        result = run_scenario(cfg, out_dir=args.out)
    except (AssertionError, ArithmeticError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in result.files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
