from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cvrp import CvrpInstance
from .ffsp import FfspInstance
from .tsp import TspInstance

# Conventional vehicle capacity by customer count.
CVRP_CAPACITY = {10: 20, 20: 30, 50: 40, 100: 50}


def default_capacity(n: int) -> int:
    if n in CVRP_CAPACITY:
        return CVRP_CAPACITY[n]
    keys = sorted(CVRP_CAPACITY)
    for k in keys:
        if n <= k:
            return CVRP_CAPACITY[k]
    return CVRP_CAPACITY[keys[-1]]


@dataclass(frozen=True)
class InstanceGenerator:
    """Seeded instance distribution.

    ``size`` is the node count (TSP), customer count (CVRP) or job count
    (FFSP).  Instance ``index`` is drawn from its own stream, so instances
    can be generated in any order or in parallel.
    """

    kind: str
    size: int
    seed: int = 0
    demand_range: tuple[int, int] = (1, 9)
    capacity: int | None = None
    num_stages: int = 3
    machines_per_stage: int = 4
    proc_range: tuple[int, int] = (2, 9)

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "demand_range", tuple(self.demand_range))
        object.__setattr__(self, "proc_range", tuple(self.proc_range))
        minimum = {"TSP": 3, "CVRP": 1, "FFSP": 1}
        if kind not in minimum:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.size < minimum[kind]:
            raise ValueError(f"{kind} size must be >= {minimum[kind]}, got {self.size}")
        lo, hi = self.demand_range
        if kind == "CVRP" and not 1 <= lo <= hi <= self.resolved_capacity:
            raise ValueError("demand range must lie within [1, capacity]")
        lo, hi = self.proc_range
        if kind == "FFSP" and not (1 <= lo <= hi and self.num_stages >= 1 and self.machines_per_stage >= 1):
            raise ValueError("invalid FFSP parameters")

    @property
    def resolved_capacity(self) -> int:
        return self.capacity if self.capacity is not None else default_capacity(self.size)

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, index])

    def __call__(self, index: int):
        return generate_instance(self, index)


def generate_instance(gen: InstanceGenerator, index: int):
    if index < 0:
        raise ValueError("index must be >= 0")
    rng = gen.rng(index)
    n = gen.size
    if gen.kind == "TSP":
        return TspInstance(rng.random((n, 2)))
    if gen.kind == "CVRP":
        depot = rng.random(2)
        coords = rng.random((n, 2))
        lo, hi = gen.demand_range
        demands = rng.integers(lo, hi + 1, size=n)
        return CvrpInstance(depot, coords, demands, gen.resolved_capacity)
    lo, hi = gen.proc_range
    stages = tuple(
        rng.integers(lo, hi + 1, size=(gen.machines_per_stage, n)) for _ in range(gen.num_stages)
    )
    return FfspInstance(n, stages)


def generate_set(gen: InstanceGenerator, count: int, start: int = 0) -> list:
    return [generate_instance(gen, i) for i in range(start, start + count)]
