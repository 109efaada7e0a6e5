"""Minimum test error vs fraction of compromised devices (beta = C).

Usage: python scripts/fig3_byzantine_ratio.py [--out results/fig3] [--jobs 4]
"""
import argparse
import csv
from pathlib import Path

from dummyfl.sweep import parse_config, run_sweep

ROOT = Path(__file__).resolve().parents[1]


def print_table(summary_path, column):
    rows = list(csv.DictReader(open(summary_path, newline="")))
    for attack in sorted({r["attack"] for r in rows}):
        sub = [r for r in rows if r["attack"] == attack]
        keys = sorted({r[column] for r in sub}, key=float)
        rules = list(dict.fromkeys(r["rule"] for r in sub))
        print(f"\n{attack} attack: min test error by {column}")
        print(f"{'rule':>18s}  " + "  ".join(f"{k:>7s}" for k in keys))
        for rule in rules:
            cells = []
            for k in keys:
                hit = [r for r in sub if r["rule"] == rule and r[column] == k]
                cells.append(f"{float(hit[0]['min_test_err']):7.3f}" if hit and hit[0]["min_test_err"] else "      -")
            print(f"{rule:>18s}  " + "  ".join(cells))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results" / "fig3"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()
    spec = parse_config(ROOT / "configs" / "fig3_byzantine_ratio.cfg", args.overrides)
    status = run_sweep(spec, args.out, jobs=args.jobs)
    print_table(Path(args.out) / "summary.csv", "p")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
