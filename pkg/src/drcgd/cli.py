"""Command line entry point: ``drcgd run`` and ``drcgd compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import DrcgdError, ParseError, SchemaMismatch, UnknownColumn, ValidationError
from .experiment import compare, execute, parse_config, with_overrides

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drcgd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a key=value config file")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, help="override the config's master seed")
    p_run.add_argument("--out", help="override the config's output_path")
    p_run.add_argument("--workers", type=int, default=1, help="threads for per-agent updates")

    p_cmp = sub.add_parser("compare", help="first epoch at which a metric reaches a threshold")
    p_cmp.add_argument("csv", nargs="+", type=Path)
    p_cmp.add_argument("--metric", default="ds")
    p_cmp.add_argument("--threshold", type=float, default=1e-3)
    return parser


def _cmd_run(args) -> int:
    try:
        config = parse_config(args.config.read_text(encoding="utf-8"))
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output_path"] = args.out
        if overrides:
            config = with_overrides(config, **overrides)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, ValidationError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        path = execute(config, workers=args.workers)
    except (DrcgdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        rows = compare(args.csv, args.metric, args.threshold)
    except (SchemaMismatch, UnknownColumn) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path, k in rows:
        print(f"{path}\t{'never' if k is None else k}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_compare(args)


if __name__ == "__main__":
    sys.exit(main())
