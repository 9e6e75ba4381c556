"""argparse front end.

Exit codes: 0 success, 1 runtime abort, 2 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import AlesimError, InvalidParameterError
from . import commands
from . import config as cfgmod

EXIT_OK = 0
EXIT_ABORT = 1
EXIT_INVALID = 2

log = logging.getLogger("alesim")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="alesim", description="Conformal aggregation simulator and validation suite")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_config=True):
        p.add_argument("--config", required=need_config, metavar="PATH",
                       help="JSON config (a manifest.json replays its run)")
        p.add_argument("--seed", type=int, default=None, metavar="N", help="override run.seed")
        p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("simulate", help="single run: angles, deviation, coeffs, boundary, manifest")
    common(p)
    p.add_argument("--angles", metavar="CSV", help="replay this angle/capacity history instead of sampling")

    p = sub.add_parser("ensemble", help="seeded ensemble plus aggregated covariance report")
    common(p)
    p.add_argument("--jobs", type=int, default=None, metavar="N", help="worker processes (default: ensemble.parallelism)")

    p = sub.add_parser("analyze", help="(re)aggregate an ensemble directory or emit OU reference tables")
    p.add_argument("target", metavar="DIR")

    p = sub.add_parser("verify-particle", help="certify a basic particle map")
    p.add_argument("type", choices=["slit", "spreadout"])
    p.add_argument("c", type=float)
    p.add_argument("--gamma", type=complex, default=None, help="spread-out shape parameter (default: threshold)")

    p = sub.add_parser("render", help="redraw boundary.svg for a run directory")
    p.add_argument("target", metavar="DIR")
    return ap


def _dispatch(args) -> int:
    if args.command == "simulate":
        man = commands.simulate(cfgmod.load(args.config), args.out, seed=args.seed, angles_path=args.angles)
        print(json.dumps({"run_id": man.run_id, "status": man.status, "abort": man.abort}))
        return EXIT_OK if man.status == "ok" else EXIT_ABORT
    if args.command == "ensemble":
        rep = commands.ensemble(cfgmod.load(args.config), args.out, seed=args.seed, jobs=args.jobs)
        print(json.dumps({"status": rep.get("status"), "size": rep.get("size"), "failed": len(rep["failed_runs"])}))
        return EXIT_ABORT if rep["failed_runs"] else EXIT_OK
    if args.command == "analyze":
        rep = commands.analyze(args.target)
        print(json.dumps({"status": rep.get("status")}))
        return EXIT_OK
    if args.command == "verify-particle":
        rep = commands.verify_particle(args.type, args.c, args.gamma)
        print(json.dumps(rep, indent=2))
        return EXIT_OK if rep["certified"] else EXIT_INVALID
    if args.command == "render":
        print(commands.render(args.target))
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (InvalidParameterError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except AlesimError as err:
        print(f"aborted: {err}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
