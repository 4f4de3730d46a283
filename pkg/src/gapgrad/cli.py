"""Command-line front end: one subcommand per experiment kind.

Exit status: 0 when every verdict passes, 1 when any fails, 2 when the
run itself errors (bad config, solver breakdown).  GAPGRAD_THREADS caps
worker concurrency for the sweep and refinement kinds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import GapgradError
from .harness import KINDS, config_from_dict, run_experiment


def _read_config_data(path: str) -> dict:
    text = Path(path).read_bytes().decode()
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gapgrad",
        description="Verification experiments for gradient rates of the "
        "insulated conductivity problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        name = kind.replace("_", "-")
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument(
            "--config", required=True, help="TOML or JSON experiment config"
        )
        p.add_argument(
            "--json",
            action="store_true",
            help="print the JSON report to stdout",
        )
        p.add_argument("--out", help="output directory (overrides config)")
        p.set_defaults(kind=kind)
    return parser


def _format_verdict(v: dict) -> str:
    status = "PASS" if v["passed"] else "FAIL"
    return (
        f"[{status}] {v['name']}: observed={v['observed']} "
        f"predicted={v['predicted']} tolerance={v['tolerance']}"
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = _read_config_data(args.config)
        declared = data.get("kind")
        if declared is not None and declared != args.kind:
            raise GapgradError(
                f"config declares kind={declared!r} but the "
                f"{args.kind.replace('_', '-')} subcommand was invoked"
            )
        data["kind"] = args.kind
        if args.out:
            data["output_dir"] = args.out
        config = config_from_dict(data)
        bundle = run_experiment(config)
    except GapgradError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.json:
        report_path = Path(bundle.output_dir) / "report.json"
        sys.stdout.write(report_path.read_text())
    else:
        for v in bundle.verdicts:
            print(_format_verdict(v))
        print(f"report: {Path(bundle.output_dir) / 'report.json'}")
        for name in bundle.artifacts:
            print(f"artifact: {Path(bundle.output_dir) / name}")
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
