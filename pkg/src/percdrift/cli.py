"""Command-line entry point: percdrift validate|run <config.yaml>."""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .errors import ConfigError
from .experiments import load_config, run, validate_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="percdrift",
        description="Biased walk on the supercritical percolation cluster: "
                    "experiment harness")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="statically check a config file")
    p_val.add_argument("config")

    p_run = sub.add_parser("run", help="execute an experiment")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: PERCDRIFT_WORKERS or 1)")
    p_run.add_argument("--output", default=None, help="output directory override")
    p_run.add_argument("--seed", type=int, default=None, help="master seed override")

    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if args.command == "validate":
        diags = validate_config(cfg)
        for level, path, msg in diags:
            print(f"{level}: {path}: {msg}")
        if not diags:
            print("ok")
        return 1 if any(d[0] == "error" for d in diags) else 0

    if args.seed is not None:
        cfg.env["seed"] = args.seed
    workers = args.workers
    if workers is None:
        workers = cfg.workers or int(os.environ.get("PERCDRIFT_WORKERS", "1"))
    try:
        manifest = run(cfg, workers=workers, output=args.output)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"run {manifest.run_id} complete; outputs: {', '.join(manifest.outputs)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
