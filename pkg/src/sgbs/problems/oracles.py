"""Exact solvers for desk-scale instances."""
from __future__ import annotations

import itertools

import numpy as np

from . import cvrp, ffsp, tsp
from .base import Solution

TSP_MAX_N = 13
CVRP_MAX_N = 8


def held_karp(dist: np.ndarray, nodes) -> tuple[float, list[int]]:
    """Shortest closed tour through ``nodes`` starting at ``nodes[0]``.

    Returns (length, order) where ``order`` begins with ``nodes[0]``.
    """
    nodes = list(nodes)
    k = len(nodes)
    if k == 1:
        return 0.0, nodes
    if k == 2:
        return 2 * float(dist[nodes[0], nodes[1]]), nodes
    d = dist[np.ix_(nodes, nodes)]
    m = k - 1  # node 0 of the sub-problem is the fixed start
    full = 1 << m
    cost = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int64)
    for i in range(m):
        cost[1 << i, i] = d[0, i + 1]
    for mask in range(1, full):
        row = cost[mask]
        if not np.isfinite(row).any():
            continue
        for j in range(m):
            if mask & (1 << j):
                continue
            # extend every end point i in mask by node j
            cand = row + d[1:, j + 1]
            i = int(np.argmin(cand))
            nm = mask | (1 << j)
            if cand[i] < cost[nm, j]:
                cost[nm, j] = cand[i]
                parent[nm, j] = i
    last = cost[full - 1] + d[1:, 0]
    j = int(np.argmin(last))
    best = float(last[j])
    order, mask = [], full - 1
    while j >= 0:
        order.append(j + 1)
        pj = parent[mask, j]
        mask ^= 1 << j
        j = int(pj)
    order.reverse()
    return best, [nodes[0]] + [nodes[i] for i in order]


def _canonical_tsp(instance: tsp.TspInstance, order: list[int]) -> Solution:
    fwd = tuple(order[1:])
    bwd = tuple(reversed(fwd))
    acts = min(fwd, bwd)
    return Solution(acts, tsp.reward(instance, acts))


def tsp_optimum(instance: tsp.TspInstance) -> Solution:
    if instance.n > TSP_MAX_N:
        raise ValueError(f"TSP oracle limited to n <= {TSP_MAX_N}")
    _, order = held_karp(instance.dist, range(instance.n))
    return _canonical_tsp(instance, order)


def tsp_enumerate(instance: tsp.TspInstance) -> Solution:
    """Permutation enumeration; independent check on ``held_karp``."""
    best = None
    for perm in itertools.permutations(range(1, instance.n)):
        r = tsp.reward(instance, perm)
        if best is None or r > best.reward + 1e-12:
            best = Solution(perm, r)
    return best


def _route_canonical(route: list[int]) -> tuple[int, ...]:
    return tuple(route) if route[0] <= route[-1] else tuple(reversed(route))


def cvrp_optimum(instance: cvrp.CvrpInstance) -> Solution:
    """Capacity-feasible set partitions, each route solved exactly."""
    n = instance.n
    if n > CVRP_MAX_N:
        raise ValueError(f"CVRP oracle limited to n <= {CVRP_MAX_N}")
    dem = instance.demands
    full = 1 << n
    route_cost = {}
    route_seq = {}
    for mask in range(1, full):
        members = [i + 1 for i in range(n) if mask >> i & 1]
        if sum(int(dem[c - 1]) for c in members) > instance.capacity:
            continue
        length, order = held_karp(instance.dist, [0] + members)
        route_cost[mask] = length
        route_seq[mask] = _route_canonical(order[1:])
    best = {0: (0.0, [])}
    for mask in range(1, full):
        low = mask & -mask
        rest = mask ^ low
        cand = None
        # every submask of mask that contains its lowest customer
        sub = rest
        while True:
            s = sub | low
            if s in route_cost and (mask ^ s) in best:
                c = route_cost[s] + best[mask ^ s][0]
                if cand is None or c < cand[0]:
                    cand = (c, [s] + best[mask ^ s][1])
            if sub == 0:
                break
            sub = (sub - 1) & rest
        if cand is not None:
            best[mask] = cand
    _, parts = best[full - 1]
    routes = sorted(route_seq[s] for s in parts)
    acts = []
    for i, r in enumerate(routes):
        if i:
            acts.append(0)
        acts.extend(r)
    acts = tuple(acts)
    return Solution(acts, cvrp.reward(instance, acts))


def brute_force_optimum(instance) -> Solution:
    if isinstance(instance, tsp.TspInstance):
        return tsp_optimum(instance)
    if isinstance(instance, cvrp.CvrpInstance):
        return cvrp_optimum(instance)
    if isinstance(instance, ffsp.FfspInstance):
        return ffsp.brute_force(instance)
    raise TypeError(f"unsupported instance {type(instance).__name__}")
