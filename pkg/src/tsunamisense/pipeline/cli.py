"""Command-line entry point: ``tsunamisense <stage> [--config C] [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import TsunamiSenseError
from .config import load_config
from .stages import STAGES, cmd_reconstruct


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsunamisense", description="Tsunami sparse-sensing experiment pipeline")
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in (*STAGES, "run"):
        p = sub.add_parser(name, help="all stages in order" if name == "run" else f"{name} stage")
        p.add_argument("--config", type=Path, default=None, help="JSON experiment config (default: packaged desk config)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config out_dir)")
        p.add_argument("--seed", type=int, default=None, help="master seed overriding the config")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "reconstruct":
            p.add_argument("--epicenters", nargs="+", default=None, help="epicenter ids (default: test set)")
    return parser


def _fail(stage: str, code: str, detail) -> int:
    detail = " ".join(str(detail).split())
    print(f"stage={stage} code={code} detail={detail}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    stage = args.stage
    try:
        cfg = load_config(args.config)
        if args.seed is not None and args.seed < 0:
            return _fail(stage, "bad-config", "seed must be non-negative")
        cfg = cfg.seeded(args.seed)
        out = args.out if args.out is not None else Path(cfg.out_dir)
        if stage == "run":
            for name, fn in STAGES.items():
                stage = name
                fn(cfg, out)
        elif stage == "reconstruct":
            cmd_reconstruct(cfg, out, args.epicenters)
        else:
            STAGES[stage](cfg, out)
    except TsunamiSenseError as exc:
        return _fail(stage, exc.code, exc.detail)
    except FileNotFoundError as exc:
        return _fail(stage, "missing-input", exc)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(stage, "invalid-input", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
