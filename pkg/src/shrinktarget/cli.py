"""Command line: ``shrinktarget run <config.json>`` and ``shrinktarget replay <manifest.json>``.

Exit status: 0 success, 1 schema violation, 2 precision failure, 3 budget
failure, 4 replay mismatch or missing artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError
from .errors import BudgetError, PrecisionError
from .runner import OUTPUT_ENV, replay, run_config

EXIT_OK, EXIT_SCHEMA, EXIT_PRECISION, EXIT_BUDGET, EXIT_REPLAY = 0, 1, 2, 3, 4


def _overrides(ns) -> dict:
    return {"seed": ns.seed, "work_bits": ns.work_bits, "guard_bits": ns.guard_bits}


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--work-bits", type=int, help="working precision in bits")
    p.add_argument("--guard-bits", type=int, help="guard bits for fractional-part windows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shrinktarget", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", help="path to the experiment config (JSON)")
    run.add_argument("--out", help=f"output directory (default: config.output, then ${OUTPUT_ENV})")
    _add_overrides(run)
    rep = sub.add_parser("replay", help="re-run a manifest and compare artifacts")
    rep.add_argument("manifest", help="path to manifest.json")
    _add_overrides(rep)
    return parser


def _cmd_run(ns) -> int:
    try:
        with open(ns.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    manifest, out_dir = run_config(data, ns.out, **_overrides(ns))
    print(f"wrote {len(manifest['files'])} artifacts to {out_dir}")
    if manifest["status"] != "ok":
        print(f"error: {manifest['precision_failures']} precision failures", file=sys.stderr)
        return EXIT_PRECISION
    return EXIT_OK


def _cmd_replay(ns) -> int:
    try:
        res = replay(ns.manifest, **_overrides(ns))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot replay: {exc}", file=sys.stderr)
        return EXIT_REPLAY
    print(json.dumps(res, sort_keys=True))
    return EXIT_OK if res["status"] in ("match", "tolerant-match") else EXIT_REPLAY


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return _cmd_run(ns) if ns.command == "run" else _cmd_replay(ns)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_SCHEMA
    except BudgetError as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PrecisionError as exc:
        print(f"error: precision: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except ValueError as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
