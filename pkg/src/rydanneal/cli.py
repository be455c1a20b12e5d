"""Command-line entry point.

Exit codes: 0 ok, 2 config error, 3 validity window, 4 resonance,
5 numerical failure, 6 cross-talk. Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import pipeline as pl
from .anneal import StiffnessError
from .dressing import CrosstalkError, ResonanceError, TrackingError
from .structure.atoms import MissingDataError

log = logging.getLogger("rydanneal")

ERRORS = (
    (pl.ConfigError, pl.EXIT_CONFIG, "config"),
    (MissingDataError, pl.EXIT_CONFIG, "config"),
    (pl.WindowError, pl.EXIT_WINDOW, "window"),
    (ResonanceError, pl.EXIT_RESONANCE, "resonance"),
    (CrosstalkError, pl.EXIT_CROSSTALK, "crosstalk"),
    (StiffnessError, pl.EXIT_NUMERICAL, "numerical"),
    (TrackingError, pl.EXIT_NUMERICAL, "numerical"),
    (np.linalg.LinAlgError, pl.EXIT_NUMERICAL, "numerical"),
    (FloatingPointError, pl.EXIT_NUMERICAL, "numerical"),
)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config; defaults reproduce the minimal N=4 setup")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes for ensembles")
    p.add_argument("--out", default="rydanneal-out", help="output directory")
    p.add_argument("--cache-dir", help="curve cache directory (else $RYDANNEAL_CACHE_DIR)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydanneal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("pipeline", help="run several stages from one config")
    _common(p)
    p.add_argument("--stage", choices=(*pl.STAGES, "all"), default="all")
    for name in pl.STAGES:
        _common(sub.add_parser(name, help=f"run only the {name} stage"))
    c = sub.add_parser("cache", help="inspect the molecular-curve cache")
    c.add_argument("action", choices=("list", "clear", "verify"))
    c.add_argument("--cache-dir")
    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": str(exc),
                      "type": type(exc).__name__}), file=sys.stderr)
    return code


def cmd_cache(args) -> int:
    from .structure.cache import CurveCache

    cache = CurveCache(args.cache_dir)
    if args.action == "list":
        print(json.dumps({"root": str(cache.root), "entries": cache.list()}, indent=2))
        return 0
    if args.action == "clear":
        print(json.dumps({"root": str(cache.root), "removed": cache.clear()}))
        return 0
    report = cache.verify()
    bad = {k: v for k, v in report.items() if v}
    print(json.dumps({"root": str(cache.root), "checked": len(report), "corrupt": bad}, indent=2))
    return 1 if bad else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "cache":
        return cmd_cache(args)
    try:
        config = pl.load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        if args.threads < 1:
            raise pl.ConfigError("--threads must be at least 1")
        stage = args.stage if args.command == "pipeline" else args.command
        stages = pl.resolve_stages(stage, config)
        ctx = pl.run(config, args.out, stages, args.threads, args.cache_dir)
    except Exception as exc:  # mapped to exit codes below
        for cls, code, kind in ERRORS:
            if isinstance(exc, cls):
                return _fail(code, kind, exc)
        raise
    print(json.dumps({"run_id": ctx.run_id, "out": str(ctx.out), "outputs": sorted(ctx.artifacts)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
