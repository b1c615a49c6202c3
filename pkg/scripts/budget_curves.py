"""Mean cost of each search method as the per-instance budget grows.

Runs the compare command once per budget and prints one row per budget.
"""
import argparse
from pathlib import Path

from sgbs.harness import commands
from sgbs.harness.config import load


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/tsp20_search.json")
    ap.add_argument("--budgets", default="100,300,600,1200")
    ap.add_argument("--count", type=int, help="override the instance count")
    ap.add_argument("--out", default="runs/budget_curves")
    args = ap.parse_args()
    rows = []
    for b in (int(x) for x in args.budgets.split(",")):
        over = {"budget": b, "out": str(Path(args.out) / f"b{b}")}
        if args.count:
            over["count"] = args.count
        report = commands.cmd_compare(load(args.config, over))
        rows.append((b, {k: v["mean_gap_pct"] for k, v in report["summary"].items()}))
    labels = list(rows[0][1])
    print("budget  " + "  ".join(f"{l:>14}" for l in labels))
    for b, gaps in rows:
        print(f"{b:>6}  " + "  ".join(f"{gaps[l]:>13.3f}%" for l in labels))


if __name__ == "__main__":
    main()
