"""Regenerate the bundled TSP checkpoints in src/sgbs/data/.

Both are plain REINFORCE runs from the nearest-neighbour initial weights; the
settings here are the ones the shipped files were produced with.
"""
import argparse
from pathlib import Path

from sgbs.policy import PolicyParams, format_checkpoint
from sgbs.pretrain import PretrainConfig, pretrain
from sgbs.problems import InstanceGenerator

DATA = Path(__file__).resolve().parents[1] / "src" / "sgbs" / "data"

RUNS = {
    "tsp10": (10, PretrainConfig(lr=0.05, samples=16, instances=256, batch=8, epochs=10, seed=0)),
    "tsp20": (20, PretrainConfig(lr=0.05, samples=16, instances=256, batch=8, epochs=20, seed=0)),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, (n, cfg) in RUNS.items():
        res = pretrain(cfg, InstanceGenerator("TSP", n, seed=1), PolicyParams.initial(3))
        (args.out / f"{name}.txt").write_text(format_checkpoint(res.params))
        first, last = res.curve[0][1], res.curve[-1][1]
        print(f"{name}: held-out greedy cost {-first:.4f} -> {-last:.4f}, theta {res.params.theta}")


if __name__ == "__main__":
    main()
