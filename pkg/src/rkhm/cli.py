"""``rkhm <command> [--config path.json] [--seed N] [--out dir]``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure
(a solver error or a failed acceptance check; outputs are still written in
the latter case).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .algebra import AlgebraError
from .experiments import COMMANDS, ConfigError, ExperimentConfig, run_experiment
from .io import DataError, emit_outputs, load_json

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="rkhm", description="Kernel methods in reproducing kernel Hilbert C*-modules.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with command parameters")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default: config value or 0)")
    parser.add_argument("--out", help="output directory for summary.json, CSV tables and manifest.json")
    parser.add_argument("--quiet", action="store_true", help="print only the final status line")
    return parser


def _acceptance_lines(report):
    for name, ok in report.acceptance.items():
        yield f"{'PASS' if ok else 'FAIL'} {name}"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        obj = load_json(args.config) if args.config else {}
        cfg = ExperimentConfig.from_dict(obj, command=args.command, seed=args.seed)
    except (ConfigError, DataError) as exc:
        print(f"rkhm: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_experiment(cfg)
    except DataError as exc:
        print(f"rkhm: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    # AlgebraError derives from ValueError, so it must be caught first
    except (AlgebraError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"rkhm: numerical failure in {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"rkhm: invalid input for {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        try:
            manifest = emit_outputs(report, args.out)
        except OSError as exc:
            print(f"rkhm: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    if not args.quiet:
        for line in _acceptance_lines(report):
            print(line)
        if args.out:
            print(json.dumps({"out": args.out, "files": [f["name"] for f in manifest["files"]]}))
    status = "ok" if report.passed else "acceptance failed"
    print(f"{cfg.command} seed={cfg.seed}: {status}")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
