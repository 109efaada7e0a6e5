"""Command-line entry point: ``dummyfl --config sweep.cfg --out results/``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigurationError
from .sweep import parse_config, run_sweep

OUT_ENV = "DUMMYFL_OUT"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dummyfl", description="Run federated-learning aggregation sweeps.")
    ap.add_argument("--config", help="flat key = value config file (defaults used if omitted)")
    ap.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./results)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key; repeatable")
    ap.add_argument("--jobs", type=int, default=1, help="sweep points to run in parallel")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out or os.environ.get(OUT_ENV) or "results"
    try:
        spec = parse_config(args.config, args.overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    status = run_sweep(spec, out, jobs=max(1, args.jobs))
    if status == 2:
        print("configuration error: no sweep point has a valid configuration (see summary.csv)", file=sys.stderr)
    elif status == 3:
        print("some sweep points were skipped or failed (see summary.csv)", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
