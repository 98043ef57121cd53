"""Command-line entry point: ``surgerr <command> --manifest run.json``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import AnalysisError, ManifestError
from .pipeline import STAGES, StageFailure, ValidationFailed, load_manifest, run_pipeline, validate
from .report import dumps

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

COMMANDS = {
    "run": STAGES,
    "exec-report": ("exec",),
    "kl": ("kl",),
    "trajavg": ("trajavg",),
    "proc-report": ("proc",),
    "stats": ("stats",),
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, type=Path, help="JSON run manifest")
    p.add_argument("--task", choices=("Suturing", "NeedlePassing"), help="override the manifest task")
    p.add_argument("--clamp", action="store_true", default=None,
                   help="clamp transcript ranges that run past the kinematics instead of failing")
    p.add_argument("--method", choices=("gaussian", "histogram"), help="KL estimation method")
    p.add_argument("--seed", type=int, help="fuzzy c-means initialization seed")
    p.add_argument("--out", type=Path, help="output directory (overrides the manifest)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surgerr", description="Error analysis for surgical kinematics and gestures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="check inputs and report every problem found")
    _add_common(p)
    helps = {
        "run": "run every stage",
        "exec-report": "executional error counts per gesture",
        "kl": "DTW distance sets and KL ranking of parameter groups",
        "trajavg": "fuzzy c-means average trajectories",
        "proc-report": "procedural errors against the grammar graph",
        "stats": "duration t-tests and correlations",
    }
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=helps[name]))
    p = sub.add_parser("synthgen", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    return parser


def _overrides(args) -> dict:
    out = {"task": args.task, "clamp": args.clamp, "method": args.method, "seed": args.seed}
    if args.out is not None:
        out["output_dir"] = str(args.out.resolve())
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synthgen":
        from .synthgen import main as synth_main

        return synth_main(["--spec", str(args.spec), "--out", str(args.out)])
    try:
        manifest = load_manifest(args.manifest, _overrides(args))
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "validate":
        report = validate(manifest)
        sys.stdout.write(dumps(report.to_dict()))
        for line in report.errors:
            print(f"error: {line}", file=sys.stderr)
        print("OK" if report.ok else f"{len(report.errors)} validation error(s)", file=sys.stderr)
        return EXIT_OK if report.ok else EXIT_VALIDATION

    try:
        report = run_pipeline(manifest, COMMANDS[args.command])
    except ValidationFailed as exc:
        for line in exc.report.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, AnalysisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for w in report.warnings:
        print(f"warning [{w['stage']}]: {w['message']}", file=sys.stderr)
    print(f"wrote outputs to {manifest.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
