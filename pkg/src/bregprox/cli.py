"""Command line entry point: ``bregprox {sweep,appendix,check,verify-trace}``.

Exit codes: 0 success, 1 an acceptance check failed, 2 configuration error.
"""

import argparse
import json
import os
import sys

from .errors import ConfigError
from .harness import (ExperimentConfig, format_summary_table, run_appendix, run_checkers,
                      run_sweep, summarize_checkers, verify_trace)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _words(text):
    return [w.strip() for w in text.split(",") if w.strip()]


def _add_config_args(p):
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--lambda", dest="lambdas", type=_floats, help="e.g. 0.3,0.6,0.9")
    p.add_argument("--bregman", dest="bregmans", type=_words, help="e.g. org,breg1,breg2")
    p.add_argument("--x0", type=_floats, help="starting point, e.g. 20,5,3")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="bregprox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run every (Bregman, lambda) pair and write traces")
    _add_config_args(p)
    p.add_argument("--workers", type=int, help="parallel runs (default 1)")
    p.add_argument("--no-verify", action="store_true", help="skip run-invariant checks")

    p = sub.add_parser("appendix", help="SPD counterexample values and K_x probes")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the report to this file")

    p = sub.add_parser("check", help="run the condition checkers (report only)")
    _add_config_args(p)
    p.add_argument("--json", help="write the full report to this file")

    p = sub.add_parser("verify-trace", help="re-check a trace CSV written by sweep")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    over = dict(lambdas=args.lambdas, bregmans=args.bregmans, x0=args.x0, seed=args.seed,
                out=args.out)
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if getattr(args, "no_verify", False):
        over["verify"] = False
    try:
        return cfg.with_overrides(**over)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_sweep(args):
    cfg = _load_config(args)
    result = run_sweep(cfg)
    print(format_summary_table(result.rows))
    print(f"wrote {len(result.files)} files to {cfg.out}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _cmd_appendix(args):
    result = run_appendix(args.lam, args.pairs, args.seed)
    print("\n".join(result.lines()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result.to_dict(), fh, indent=2)
    return EXIT_OK if result.passed else EXIT_FAIL


def _cmd_check(args):
    cfg = _load_config(args)
    report = run_checkers(cfg)
    print("\n".join(summarize_checkers(report)))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
    return EXIT_OK


def _cmd_verify(args):
    if not os.path.exists(args.file):
        raise ConfigError(f"no such trace file: {args.file}")
    check = verify_trace(args.file, seed=args.seed)
    inv = check.invariants
    print(f"{args.file}: {check.rows} rows, consistent={check.consistent}")
    for msg in check.messages:
        print("  " + msg)
    for key in ("fejer_holds", "final_step_holds", "partial_sums_hold", "optimality_holds"):
        if key in inv:
            print(f"  {key}: {inv[key]}")
    if "error" in inv:
        print("  " + inv["error"])
    print("PASS" if check.passed else "FAIL")
    return EXIT_OK if check.passed else EXIT_FAIL


COMMANDS = {"sweep": _cmd_sweep, "appendix": _cmd_appendix, "check": _cmd_check,
            "verify-trace": _cmd_verify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
