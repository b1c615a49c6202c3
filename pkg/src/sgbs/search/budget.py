from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..problems import NEG_INF, Solution


class Budget:
    """Shared counter of complete candidate solutions evaluated."""

    def __init__(self, limit: int | None = None):
        if limit is not None and limit < 0:
            raise ValueError("budget must be non-negative")
        self.limit = limit
        self.used = 0

    @property
    def remaining(self) -> float:
        return math.inf if self.limit is None else self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.remaining <= 0

    def take(self, k: int) -> int:
        """Reserve up to ``k`` units; returns how many were granted."""
        granted = int(min(k, self.remaining))
        self.used += granted
        return granted


@dataclass
class IncumbentStore:
    solution: Solution | None = None
    reward: float = NEG_INF
    iteration: int = -1
    source: str = ""

    def update(self, solution: Solution, iteration: int = 0, source: str = "") -> bool:
        if self.solution is None or solution.reward > self.reward:
            self.solution = solution
            self.reward = solution.reward
            self.iteration = iteration
            self.source = source
            return True
        return False


@dataclass
class SearchTrace:
    consumed: int = 0
    truncated: bool = False
    # (candidate_count, incumbent_cost, wall_nanos, phase)
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    _t0: int = field(default_factory=time.perf_counter_ns, repr=False)

    @property
    def history(self) -> list[tuple[int, float]]:
        return [(r[0], -r[1]) for r in self.rows]

    def record(self, count: int, incumbent: IncumbentStore, phase: str) -> None:
        cost = -incumbent.reward
        if self.rows and self.rows[-1][0] == count and self.rows[-1][1] == cost:
            return
        self.rows.append((count, cost, time.perf_counter_ns() - self._t0, phase))

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["candidate_count", "incumbent_cost", "wall_nanos", "phase"])
            for count, cost, ns, phase in self.rows:
                w.writerow([count, repr(float(cost)), ns, phase])
