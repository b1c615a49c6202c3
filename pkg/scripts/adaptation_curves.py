"""Incumbent cost against candidates spent for the test-time adaptation methods.

Reads the per-method trace CSVs written by ``compare`` and averages the
running incumbent cost over instances at a few checkpoints.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from sgbs.harness import commands
from sgbs.harness.config import load


def incumbent_at(rows, marks):
    """Step function: incumbent cost after ``m`` candidates, for each mark."""
    out, i, cur = [], 0, np.nan
    for m in marks:
        while i < len(rows) and rows[i][0] <= m:
            cur = rows[i][1]
            i += 1
        out.append(cur)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/tsp20_adapt.json")
    ap.add_argument("--count", type=int)
    ap.add_argument("--marks", default="500,1000,2000,4000,8000,12000")
    ap.add_argument("--skip-run", action="store_true", help="only summarise an existing run")
    args = ap.parse_args()
    over = {"count": args.count} if args.count else {}
    cfg = load(args.config, over)
    if not args.skip_run:
        commands.cmd_compare(cfg)
    marks = [int(x) for x in args.marks.split(",")]
    print("method          " + "".join(f"{m:>10}" for m in marks))
    for path in sorted((Path(cfg.out) / "traces").glob("*.csv")):
        per = {}
        with path.open(newline="") as fh:
            for r in csv.DictReader(fh):
                per.setdefault(r["instance"], []).append((int(r["candidate_count"]), float(r["incumbent_cost"])))
        curves = np.array([incumbent_at(rows, marks) for rows in per.values()])
        print(f"{path.stem:<16}" + "".join(f"{c:>10.4f}" for c in np.nanmean(curves, axis=0)))


if __name__ == "__main__":
    main()
