"""Command-line entry point.

    romwalk run --config walk.toml --out results
    romwalk gait --config walk.toml
    romwalk export results/gait.json --format csv --out gait.csv

Exit codes: 0 success, 2 invalid configuration or arguments, 3 solver or
controller failure, 1 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .io import ExportError, export, import_json
from .pipeline import STAGES, ConfigError, PipelineConfig, config_from_dict, load_config, run

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3


def _common(p):
    p.add_argument("--config", help="TOML configuration file (defaults are used without one)")
    p.add_argument("--out", help="output directory (overrides pipeline.out)")
    p.add_argument("--seed", type=int, help="seed for any randomized fallback")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="romwalk", description="Reduced-order walking planner and biped embedding")
    ap.add_argument("--version", action="version", version=f"romwalk {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _common(sub.add_parser(name, help=f"run the {name} stage and its dependencies"))
    p = sub.add_parser("run", help="run the configured stages")
    _common(p)
    p.add_argument("--stage", action="append", choices=STAGES,
                   help="stage to run (repeatable; dependencies are added)")
    p = sub.add_parser("export", help="convert a JSON plan to CSV or canonical JSON")
    p.add_argument("input", help="plan written by a previous run")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True, help="output file")
    return ap


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.out:
        cfg = replace(cfg, out=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.command == "export":
        try:
            export(import_json(args.input), args.format, args.out)
        except ExportError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (ValueError, KeyError, TypeError) as exc:
            print(f"error: {args.input}: not a plan document ({exc})", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK
    try:
        cfg = _config(args)
        stages = args.stage if args.command == "run" else [args.command]
        manifest = run(cfg, stages=stages or None)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, info in manifest.stages.items():
        if info["status"] != "ok":
            print(f"{name}: {info['status']}: {info.get('error') or info.get('reason', '')}", file=sys.stderr)
        elif not args.quiet:
            print(f"{name}: ok")
    if manifest.status != "ok":
        return EXIT_SOLVER
    if not args.quiet:
        print(f"wrote {len(manifest.files)} files to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
