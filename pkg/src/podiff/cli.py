"""Command-line entry point: ``podiff {run,ablate,sweep} --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import StageError, execute
from .config import ExperimentConfig
from .errors import ConfigError, PodiffError

logger = logging.getLogger("podiff")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, default=None, help="override the config's RNG seed")
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    parser = argparse.ArgumentParser(
        prog="podiff",
        description="Depth completion by plane-origin distance diffusion on synthetic scenes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the full model (and any declared sweeps)")
    sub.add_parser("ablate", parents=[common], help="run every configured ablation variant")
    sub.add_parser("sweep", parents=[common], help="run the declared parameter sweeps")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg = cfg.with_overrides({"seed": args.seed})
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else cfg.output_dir
    try:
        result = execute(cfg, mode=args.command, out=out)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PodiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"wrote {len(result.rows)} rows to {out / 'metrics.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
