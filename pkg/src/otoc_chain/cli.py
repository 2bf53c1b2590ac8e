"""Command-line driver: `otoc sweep <config>`, `otoc verify <suite>`,
`otoc inspect <artifact-dir>`.

Exit codes: 0 success, 1 validation error, 2 resource/budget error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import ResourceLimitError, ValidationError
from .sweep import run_sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RESOURCE = 2
EXIT_VERIFICATION = 3


def _cmd_sweep(args) -> int:
    config = parse_config(args.config)
    out = run_sweep(config)
    print(f"artifact directory: {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import available_suites, run_suite
    if args.suite not in available_suites():
        print(f"unknown suite {args.suite!r}; available suites:", file=sys.stderr)
        for name in available_suites():
            print(f"  {name}", file=sys.stderr)
        return EXIT_VALIDATION
    results = run_suite(args.suite)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: measured={res.measured} tolerance={res.tolerance}"
              + (f" [{res.detail}]" if res.detail else ""))
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFICATION


def _cmd_inspect(args) -> int:
    art = Path(args.artifact_dir)
    manifest_path = art / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {art}")
    manifest = json.loads(manifest_path.read_text())
    print(f"engine: {manifest.get('engine_used')} "
          f"(requested {manifest.get('engine_requested')})")
    print(f"points: {manifest.get('points_completed')}/{manifest.get('points_requested')}")
    print(f"version: {manifest.get('version')}  "
          f"wall clock: {manifest.get('wall_clock_seconds', 0):.1f}s")
    for event in manifest.get("events", []):
        print(f"event: {event}")
    agg = art / "aggregate.csv"
    if agg.exists():
        lines = agg.read_text().splitlines()
        data = [ln for ln in lines if not ln.startswith("#")]
        cols = [ln for ln in lines if ln.startswith("# columns:")]
        if cols:
            print(cols[0].lstrip("# "))
        print(f"rows: {len(data)}")
        for ln in data[:5]:
            print(f"  {ln}")
        for ln in lines:
            if ln.startswith("# transition_point") or ln.startswith("# power_law_fit"):
                print(ln.lstrip("# "))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otoc",
        description="Spin-chain correlator sweeps, verification suites and "
                    "artifact inspection.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a sweep from an INI config")
    p_sweep.add_argument("config", help="path to the sweep configuration file")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="run a named verification suite")
    p_verify.add_argument("suite", help="suite name (use 'list' to enumerate)")
    p_verify.set_defaults(func=_cmd_verify)

    p_inspect = sub.add_parser("inspect", help="summarize a sweep artifact directory")
    p_inspect.add_argument("artifact_dir")
    p_inspect.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceLimitError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        if exc.details:
            print(f"details: {exc.details}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
