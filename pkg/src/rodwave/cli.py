"""Command line entry point: rodwave run | sweep | verdict."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .experiment import EXIT_FAIL, recompute_verdict, run_experiment


def _run_one(path: str, force: bool = False, output_dir=None) -> tuple[str, int, str]:
    try:
        cfg = ExperimentConfig.from_file(path)
    except (ConfigError, OSError, ValueError) as exc:
        return path, 2, f"config error: {exc}"
    res = run_experiment(cfg, force=force, output_dir=output_dir)
    return path, res.exit_code, str(res.output_dir)


def pool_size(requested: int | None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("RODWAVE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    res = run_experiment(cfg, force=args.force, output_dir=args.output_dir)
    print(json.dumps(res.verdict, indent=2))
    print(f"outputs in {res.output_dir}")
    return res.exit_code


def cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        print(f"no configs match {args.pattern!r}", file=sys.stderr)
        return 2
    worst = 0
    with ProcessPoolExecutor(max_workers=pool_size(args.jobs)) as pool:
        for path, code, where in pool.map(_run_one, paths):
            print(f"{code}  {path}  {where}")
            worst = max(worst, code)
    return worst


def cmd_verdict(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        v = recompute_verdict(run_dir)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot read run directory: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(v, indent=2))
    saved = run_dir / "verdict.json"
    if saved.exists() and json.loads(saved.read_text()).get("pass") != v["pass"]:
        print("warning: recomputed verdict differs from verdict.json", file=sys.stderr)
    return 0 if v["pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rodwave", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--force", action="store_true",
                   help="run even if the model fails the hypothesis checks")
    r.add_argument("--output-dir", default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run every config matching a glob in a process pool")
    s.add_argument("pattern")
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verdict", help="recompute pass/fail from a run directory")
    v.add_argument("run_dir")
    v.set_defaults(func=cmd_verdict)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
