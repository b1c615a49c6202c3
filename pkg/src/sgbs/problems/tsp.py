"""Euclidean TSP.  Tours start at node 0; actions are the remaining nodes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import NEG_INF, BatchEnv


def distance_matrix(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(-1))


@dataclass(frozen=True, eq=False)
class TspInstance:
    coords: np.ndarray

    kind = "TSP"

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        if c.shape[0] < 3:
            raise ValueError(f"TSP needs n >= 3, got {c.shape[0]}")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("coordinates must lie in [0, 1]")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        d = distance_matrix(c)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other):
        return isinstance(other, TspInstance) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


class TspEnv(BatchEnv):
    row_fields = ("visited", "current", "length")
    n_features = 3

    def __init__(self, instance: TspInstance, batch: int = 1):
        super().__init__(instance, batch)
        n = instance.n
        self.dist = instance.dist
        self.visited = np.zeros((batch, n), dtype=bool)
        self.visited[:, 0] = True
        self.current = np.zeros(batch, dtype=np.int64)
        self.length = np.zeros(batch)

    @property
    def n_actions(self) -> int:
        return self.instance.n

    def done(self):
        return self.visited.all(axis=1)

    def _mask(self):
        return ~self.visited

    def features(self):
        d = self.dist
        unvis = (~self.visited).astype(np.float64)
        # Mean distance from j to the other unvisited nodes.
        total = unvis @ d
        count = unvis.sum(axis=1, keepdims=True) - unvis
        spread = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
        feats = np.empty((self.batch, self.instance.n, 3))
        feats[..., 0] = d[self.current]
        feats[..., 1] = d[0][None, :]
        feats[..., 2] = spread
        return feats

    def _apply(self, rows, acts):
        self.length[rows] += self.dist[self.current[rows], acts]
        self.visited[rows, acts] = True
        self.current[rows] = acts

    def final_cost(self):
        return self.length + self.dist[self.current, 0]


def tour_length(instance: TspInstance, tour) -> float:
    d = instance.dist
    tour = list(tour)
    return float(sum(d[tour[i], tour[(i + 1) % len(tour)]] for i in range(len(tour))))


def reward(instance: TspInstance, actions) -> float:
    """Negative closed-tour length.

    Accepts either the construction's action tuple (n - 1 nodes, the tour
    implicitly starts at node 0) or a full permutation of all n nodes.
    """
    actions = tuple(int(a) for a in actions)
    n = instance.n
    if len(actions) == n - 1 and sorted(actions) == list(range(1, n)):
        return -tour_length(instance, (0,) + actions)
    if len(actions) == n and sorted(actions) == list(range(n)):
        return -tour_length(instance, actions)
    return NEG_INF
