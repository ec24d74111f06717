"""queuekit command line: analyze, simulate, validate, schema.

Exit codes: 0 ok, 1 usage or schema error, 2 validation breach, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .modelfile import ModelFileError, load_schema, parse_model_file
from .report import emit_report
from .runner import DEFAULT_TOLERANCE, run_analyze, run_simulate, run_validate

EXIT_OK, EXIT_USAGE, EXIT_BREACH, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="queuekit", description="Queueing and polling analytics with a simulation oracle.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("analyze", "closed-form metrics for every model"),
                       ("simulate", "simulation estimates for every model"),
                       ("validate", "analytic versus simulated deltas")):
        s = sub.add_parser(name, help=text)
        s.add_argument("model_file")
        s.add_argument("--seed", type=int, default=None, help="overrides sim.seed")
        s.add_argument("--horizon", type=int, default=None, help="served customers per replication")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--out", default=None, help="output path (default stdout)")
        s.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                       help="allowed |delta| in CI half-widths (validate)")
        s.add_argument("--bias", type=float, default=0.0, help=argparse.SUPPRESS)
    s = sub.add_parser("schema", help="print the model-file JSON schema")
    s.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "schema":
            text = json.dumps(load_schema(), indent=2, sort_keys=True) + "\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        try:
            mf = parse_model_file(args.model_file, seed=args.seed, horizon=args.horizon)
        except ModelFileError as exc:
            for path, msg in exc.violations:
                sys.stderr.write(f"schema violation at {path}: {msg}\n")
            return EXIT_USAGE
        code = EXIT_OK
        if args.command == "analyze":
            report = run_analyze(mf)
        elif args.command == "simulate":
            report = run_simulate(mf)
        else:
            report, breached = run_validate(mf, args.tolerance, args.bias)
            code = EXIT_BREACH if breached else EXIT_OK
        emit_report(report, args.format, args.out)
        return code
    except OSError as exc:
        sys.stderr.write(f"queuekit: {exc}\n")
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"queuekit: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
