"""Beam width / expansion factor grid for SGBS, printed as two tables."""
import argparse

import numpy as np

from sgbs.harness import commands
from sgbs.harness.config import load


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/tsp20_sweep.json")
    ap.add_argument("--count", type=int)
    args = ap.parse_args()
    cfg = load(args.config, {"count": args.count} if args.count else {})
    rows = commands.cmd_sweep(cfg)
    betas, gammas = sorted({r[0] for r in rows}), sorted({r[1] for r in rows})
    cost = np.full((len(gammas), len(betas)), np.nan)
    used = np.full_like(cost, np.nan)
    for b, g, c, u, _ in rows:
        cost[gammas.index(g), betas.index(b)] = c
        used[gammas.index(g), betas.index(b)] = u
    for title, table, fmt in (("mean cost", cost, "{:>10.4f}"), ("rollouts", used, "{:>10.1f}")):
        print(f"{title} (rows gamma, columns beta)")
        print("      " + "".join(f"{b:>10}" for b in betas))
        for g, row in zip(gammas, table):
            print(f"{g:>6}" + "".join(fmt.format(v) for v in row))


if __name__ == "__main__":
    main()
