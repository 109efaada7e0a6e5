"""Minimum test error vs quantity-skew concentration alpha at p = 0.3.

Usage: python scripts/fig4_noniid.py [--out results/fig4] [--jobs 4]
"""
import argparse
from pathlib import Path

from dummyfl.sweep import parse_config, run_sweep
from fig3_byzantine_ratio import print_table

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results" / "fig4"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()
    spec = parse_config(ROOT / "configs" / "fig4_noniid.cfg", args.overrides)
    status = run_sweep(spec, args.out, jobs=args.jobs)
    print_table(Path(args.out) / "summary.csv", "alpha")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
