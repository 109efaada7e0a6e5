"""Test accuracy per global epoch without attacks, proposed rule vs FedAvg.

Usage: python scripts/fig2_convergence.py [--out results/fig2] [--jobs 4]
"""
import argparse
import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from dummyfl.sweep import parse_config, run_sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results" / "fig2"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()

    spec = parse_config(ROOT / "configs" / "fig2_no_attack.cfg", args.overrides)
    status = run_sweep(spec, args.out, jobs=args.jobs)

    acc = defaultdict(lambda: defaultdict(list))
    with open(Path(args.out) / "metrics.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            acc[row["rule"]][int(row["round"])].append(float(row["test_acc"]))
    rules = sorted(acc)
    print("round  " + "  ".join(f"{r:>18s}" for r in rules))
    last = max(acc[rules[0]])
    for g in sorted({0, 4, 9, 19, 49, 99, last} & set(acc[rules[0]])):
        print(f"{g:5d}  " + "  ".join(f"{np.mean(acc[r][g]):18.4f}" for r in rules))
    return status


if __name__ == "__main__":
    raise SystemExit(main())
