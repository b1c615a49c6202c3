"""Capacitated VRP.  Node 0 is the depot, customers are 1..n."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import NEG_INF, BatchEnv
from .tsp import distance_matrix


@dataclass(frozen=True, eq=False)
class CvrpInstance:
    depot: np.ndarray
    coords: np.ndarray
    demands: np.ndarray
    capacity: int

    kind = "CVRP"

    def __post_init__(self):
        depot = np.array(self.depot, dtype=np.float64).reshape(2)
        coords = np.array(self.coords, dtype=np.float64).reshape(-1, 2)
        demands = np.array(self.demands, dtype=np.int64).reshape(-1)
        cap = int(self.capacity)
        if coords.shape[0] < 1:
            raise ValueError("CVRP needs at least one customer")
        if demands.shape[0] != coords.shape[0]:
            raise ValueError("one demand per customer required")
        if cap <= 0 or np.any(demands <= 0):
            raise ValueError("capacity and demands must be positive")
        if np.any(demands > cap):
            raise ValueError("every demand must fit in one vehicle")
        for name, arr in (("depot", depot), ("coords", coords), ("demands", demands)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "capacity", cap)
        pts = np.vstack([depot[None, :], coords])
        d = distance_matrix(pts)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        # demand by node index, depot included as 0
        dem = np.concatenate([[0], demands])
        dem.setflags(write=False)
        object.__setattr__(self, "node_demand", dem)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, CvrpInstance)
            and np.array_equal(self.depot, other.depot)
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.demands, other.demands)
            and self.capacity == other.capacity
        )

    def __hash__(self):
        return hash((self.coords.tobytes(), self.demands.tobytes(), self.capacity))


class CvrpEnv(BatchEnv):
    row_fields = ("visited", "current", "load", "length")
    n_features = 5

    def __init__(self, instance: CvrpInstance, batch: int = 1):
        super().__init__(instance, batch)
        self.dist = instance.dist
        self.node_demand = instance.node_demand
        self.visited = np.zeros((batch, instance.n + 1), dtype=bool)
        self.current = np.zeros(batch, dtype=np.int64)
        self.load = np.full(batch, instance.capacity, dtype=np.int64)
        self.length = np.zeros(batch)

    @property
    def n_actions(self) -> int:
        return self.instance.n + 1

    def done(self):
        return self.visited[:, 1:].all(axis=1)

    def _mask(self):
        m = ~self.visited & (self.node_demand[None, :] <= self.load[:, None])
        m[:, 0] = self.current != 0
        return m

    def features(self):
        d = self.dist
        cap = self.instance.capacity
        unvis = ~self.visited
        unvis[:, 0] = False
        u = unvis.astype(np.float64)
        total = u @ d
        count = u.sum(axis=1, keepdims=True) - u
        spread = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
        feats = np.empty((self.batch, self.n_actions, 5))
        feats[..., 0] = d[self.current]
        feats[..., 1] = d[0][None, :]
        feats[..., 2] = spread
        feats[..., 3] = (self.node_demand / cap)[None, :]
        feats[..., 4] = (self.load / cap)[:, None]
        return feats

    def _apply(self, rows, acts):
        self.length[rows] += self.dist[self.current[rows], acts]
        depot = acts == 0
        self.load[rows[depot]] = self.instance.capacity
        cust_rows, cust = rows[~depot], acts[~depot]
        self.load[cust_rows] -= self.node_demand[cust]
        self.visited[cust_rows, cust] = True
        self.current[rows] = acts

    def final_cost(self):
        return self.length + self.dist[self.current, 0]


def split_routes(actions) -> list[list[int]]:
    routes, cur = [], []
    for a in actions:
        if a == 0:
            if cur:
                routes.append(cur)
            cur = []
        else:
            cur.append(int(a))
    if cur:
        routes.append(cur)
    return routes


def route_length(instance: CvrpInstance, route) -> float:
    d = instance.dist
    path = [0, *route, 0]
    return float(sum(d[path[i], path[i + 1]] for i in range(len(path) - 1)))


def reward(instance: CvrpInstance, actions) -> float:
    """Negative total distance; depot legs at both ends of every route included.

    Repeated visits, missing customers, unknown nodes and overloaded routes
    all map to NEG_INF.
    """
    actions = [int(a) for a in actions]
    n = instance.n
    if any(a < 0 or a > n for a in actions):
        return NEG_INF
    routes = split_routes(actions)
    served = [c for r in routes for c in r]
    if sorted(served) != list(range(1, n + 1)):
        return NEG_INF
    for r in routes:
        if sum(int(instance.demands[c - 1]) for c in r) > instance.capacity:
            return NEG_INF
    # Summed leg by leg in visiting order, as the environment accumulates it,
    # so both give bit-identical values.  Depot-to-depot legs cost nothing.
    d = instance.dist
    path = [0, *actions, 0]
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += d[a, b]
    return -float(total)
