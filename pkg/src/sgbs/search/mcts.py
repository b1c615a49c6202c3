"""MCTS baseline with per-depth move commitment.

Exploration bonus: U(s, a) = c_puct * P(s, a) * sqrt(sum_b N(s, b)) / (offset + N(s, a)).
Q is the mean rollout reward of the edge, min-max normalised by the rewards
observed so far on the instance; unvisited edges have Q = 0.  A fresh tree is
grown at each committed depth, and the most visited child is committed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..policy import Policy
from ..problems import BatchEnv, Solution, make_env
from . import rollout
from .budget import Budget, IncumbentStore, SearchTrace


@dataclass(frozen=True)
class MctsConfig:
    c_puct: float = 1.0
    simulations: int = 12
    offset: float = 0.1

    def __post_init__(self):
        if self.c_puct <= 0 or self.offset <= 0 or self.simulations < 1:
            raise ValueError("invalid MCTS configuration")


def exploration_bonus(c_puct: float, prior, visits, offset: float = 0.1) -> np.ndarray:
    prior = np.asarray(prior, dtype=np.float64)
    visits = np.asarray(visits, dtype=np.float64)
    return c_puct * prior * math.sqrt(visits.sum()) / (offset + visits)


class MctsNode:
    __slots__ = ("env", "terminal", "actions", "prior", "N", "W", "children")

    def __init__(self, env: BatchEnv, policy: Policy):
        self.env = env
        self.terminal = bool(env.done()[0])
        self.children: dict[int, MctsNode] = {}
        if self.terminal:
            self.actions = np.zeros(0, dtype=np.int64)
            self.prior = self.N = self.W = np.zeros(0)
            return
        logp = policy.log_probs(env.features(), env.mask())[0]
        self.actions = np.flatnonzero(np.isfinite(logp))
        self.prior = np.exp(logp[self.actions])
        self.N = np.zeros(len(self.actions))
        self.W = np.zeros(len(self.actions))

    def q_values(self, lo: float, hi: float) -> np.ndarray:
        mean = np.divide(self.W, self.N, out=np.zeros_like(self.W), where=self.N > 0)
        if hi > lo:
            q = (mean - lo) / (hi - lo)
        else:
            q = np.full_like(mean, 0.5)
        return np.where(self.N > 0, q, 0.0)

    def raw_q(self) -> np.ndarray:
        return np.divide(self.W, self.N, out=np.full_like(self.W, np.nan), where=self.N > 0)

    def child(self, i: int, policy: Policy) -> "MctsNode":
        a = int(self.actions[i])
        if a not in self.children:
            env = self.env.take([0])
            env.step([a])
            self.children[a] = MctsNode(env, policy)
        return self.children[a]


def _argmax_with_ties(score, prior, actions) -> int:
    # score desc, prior desc, action asc
    return int(np.lexsort((actions, -prior, -score))[0])


def mcts_search(
    policy: Policy,
    instance,
    config: MctsConfig = MctsConfig(),
    budget: Budget | None = None,
    incumbent: IncumbentStore | None = None,
    trace: SearchTrace | None = None,
) -> tuple[Solution, SearchTrace]:
    budget = budget if budget is not None else Budget()
    incumbent = incumbent if incumbent is not None else IncumbentStore()
    trace = trace if trace is not None else SearchTrace()
    local = IncumbentStore()
    depth_log = trace.extra.setdefault("depths", [])
    used_at_start = budget.used
    seen = [math.inf, -math.inf]  # min, max observed reward

    def evaluate(node: MctsNode) -> float | None:
        if not budget.take(1):
            return None
        if node.terminal:
            env = node.env
        else:
            env = node.env.take([0])
            rollout.run(env, policy)
        sol = Solution(env.row_actions(0), float(env.rewards()[0]))
        local.update(sol, 0, "mcts")
        if incumbent.update(sol, 0, "mcts"):
            trace.record(budget.used, incumbent, "mcts")
        seen[0] = min(seen[0], sol.reward)
        seen[1] = max(seen[1], sol.reward)
        return sol.reward

    root = MctsNode(make_env(instance, 1), policy)
    while not root.terminal:
        sims = 0
        if len(root.actions) > 1:
            for _ in range(config.simulations):
                path, node = [], root
                value = None
                while True:
                    score = node.q_values(*seen) + exploration_bonus(
                        config.c_puct, node.prior, node.N, config.offset
                    )
                    i = _argmax_with_ties(score, node.prior, node.actions)
                    fresh = int(node.actions[i]) not in node.children
                    path.append((node, i))
                    node = node.child(i, policy)
                    if fresh or node.terminal:
                        value = evaluate(node)
                        break
                if value is None:
                    trace.truncated = True
                    break
                for n, i in path:
                    n.N[i] += 1
                    n.W[i] += value
                sims += 1
        depth_log.append(
            {
                "simulations": sims,
                "visits": int(root.N.sum()),
                "q": [float(q) for q in root.raw_q() if not math.isnan(q)],
            }
        )
        if trace.truncated:
            break
        if root.N.sum() > 0:
            mean = root.raw_q()
            mean = np.where(np.isnan(mean), -np.inf, mean)
            i = int(np.lexsort((root.actions, -root.prior, -mean, -root.N))[0])
        else:
            i = 0
        root = root.child(i, policy)
        root.children = {}
        for attr in ("N", "W"):
            setattr(root, attr, np.zeros(len(root.actions)))

    if local.solution is None and root.terminal:
        # every decision was forced, so nothing was simulated
        evaluate(root)
    trace.consumed += budget.used - used_at_start
    trace.extra["min_reward"], trace.extra["max_reward"] = seen
    return local.solution or incumbent.solution, trace
