"""Command-line entry point: ``privlog anonymize | evaluate | inspect``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from privlog.calibration import DAY, Mode
from privlog.errors import LogParseError, LogValidationError, UnreleasableLogError
from privlog.log_io import dumps_event_log, guess_format, read_event_log
from privlog.metrics import evaluate
from privlog.pipeline import RunConfig, anonymize, inspect_log

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_UNRELEASABLE = 4
EXIT_IO = 5

log = logging.getLogger("privlog")


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=False) + "\n").encode("utf-8")


def cmd_anonymize(args) -> int:
    fmt = args.format or guess_format(args.input)
    out_fmt = args.format or _format_or(args.output, fmt)
    config = RunConfig(
        input=Path(args.input),
        output=Path(args.output),
        format=fmt,
        delta=args.delta,
        mode=Mode(args.mode),
        start_precision=args.start_precision_days * DAY,
        time_precision=args.time_precision_seconds,
        compress=args.compress,
        scale_by_trace_length=args.scale_by_trace_length,
        seed=args.seed,
        report=Path(args.report) if args.report else None,
        workers=args.workers,
    )
    original = read_event_log(config.input, fmt)
    result = anonymize(original, config)
    rel = result.released
    payload = dumps_event_log(
        rel.log, out_fmt, event_epsilons=rel.event_epsilons, trace_epsilons=rel.trace_epsilons
    )
    report = _json_bytes(result.report)
    _atomic_write(config.output, payload)
    if config.report:
        _atomic_write(config.report, report)
    log.info("runtime %.3f s", result.runtime_seconds)
    return EXIT_OK


def _format_or(path, default):
    try:
        return guess_format(path)
    except LogValidationError:
        return default


def cmd_evaluate(args) -> int:
    original = read_event_log(args.original, args.format)
    released = read_event_log(args.released, args.format)
    report = evaluate(original, released)
    if args.output:
        if str(args.output).endswith(".csv"):
            _atomic_write(Path(args.output), report.csv_row(header=True).encode("utf-8"))
        else:
            _atomic_write(Path(args.output), _json_bytes(report.to_dict()))
    else:
        sys.stdout.write(_json_bytes(report.to_dict()).decode())
    return EXIT_OK


def cmd_inspect(args) -> int:
    summary = inspect_log(read_event_log(args.input, args.format))
    if args.json:
        sys.stdout.write(_json_bytes(summary).decode())
        return EXIT_OK
    print(f"traces      {summary['traces']}")
    print(f"events      {summary['events']}")
    print(f"variants    {summary['variants']}")
    print(f"dafsa       {summary['dafsa_states']} states, {summary['dafsa_transitions']} transitions")
    print("source  activity  target  count")
    for row in summary["contingency_table"]:
        print(f"s{row['source']:<6} {row['activity']:<9} s{row['target']:<6} {row['count']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privlog", description="Differentially private event log release.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("anonymize", help="release a differentially private copy of a log")
    an.add_argument("--input", required=True)
    an.add_argument("--output", required=True)
    an.add_argument("--format", choices=["xes", "csv"])
    an.add_argument("--delta", type=float, required=True, help="guessing advantage bound in (0, 1)")
    an.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FILTER_SAMPLE.value)
    an.add_argument("--start-precision-days", type=float, default=1.0)
    an.add_argument("--time-precision-seconds", type=float, default=10.0)
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--compress", action=argparse.BooleanOptionalAction, default=True)
    an.add_argument("--scale-by-trace-length", action="store_true")
    an.add_argument("--report")
    an.add_argument("--workers", type=int, default=1)
    an.set_defaults(func=cmd_anonymize)

    ev = sub.add_parser("evaluate", help="compare a released log against the original")
    ev.add_argument("--original", required=True)
    ev.add_argument("--released", required=True)
    ev.add_argument("--output")
    ev.add_argument("--format", choices=["xes", "csv"])
    ev.set_defaults(func=cmd_evaluate)

    ins = sub.add_parser("inspect", help="summarise a log and its automaton")
    ins.add_argument("--input", required=True)
    ins.add_argument("--format", choices=["xes", "csv"])
    ins.add_argument("--json", action="store_true")
    ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UnreleasableLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNRELEASABLE
    except (LogParseError, LogValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
