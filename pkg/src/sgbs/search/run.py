"""Fair-budget driver: every method draws on one candidate-solution counter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..policy import Policy
from ..problems import Solution, make_env
from . import rollout
from .beam import nlp_beam_search
from .budget import Budget, IncumbentStore, SearchTrace
from .mcts import MctsConfig, mcts_search
from .sgbs import SgbsConfig, sgbs

METHODS = ("greedy", "sampling", "beam", "mcts", "sgbs", "active-search", "eas", "sgbs+eas")


@dataclass
class BudgetReport:
    method: str
    solution: Solution
    consumed: int
    budget: int
    truncated: bool
    curve: list = field(default_factory=list)  # (count, incumbent_cost)
    trace: SearchTrace | None = None

    @property
    def cost(self) -> float:
        return -self.solution.reward


def sampling(policy: Policy, instance, budget: Budget, seed: int = 0, chunk: int = 512, trace=None):
    trace = trace if trace is not None else SearchTrace()
    incumbent = IncumbentStore()
    rng = np.random.default_rng(seed)
    start = budget.used
    while not budget.exhausted:
        m = budget.take(chunk)
        env, _ = rollout.sample_batch(policy, instance, m, rng)
        rewards = env.rewards()
        for r in range(m):
            if rewards[r] > incumbent.reward:
                incumbent.update(Solution(env.row_actions(r), float(rewards[r])), 0, "sample")
                trace.record(budget.used - m + r + 1, incumbent, "sampling")
    trace.consumed += budget.used - start
    return incumbent.solution, trace


def run_with_budget(method: str, policy: Policy, instance, budget: int, **params) -> BudgetReport:
    """Run one method until it stops or the shared counter reaches ``budget``.

    ``params`` are method specific: ``seed`` and ``chunk`` (sampling), ``width``
    (beam, defaults to the budget), ``config`` (sgbs / mcts / EAS variants).
    """
    from ..eas import EasConfig, active_search, eas, sgbs_eas

    counter = Budget(budget)
    trace = SearchTrace()
    if method == "greedy":
        counter.take(1)
        env = make_env(instance, 1)
        rollout.run(env, policy)
        sol = Solution(env.row_actions(0), float(env.rewards()[0]))
        trace.consumed = 1
        trace.record(1, IncumbentStore(sol, sol.reward), "greedy")
    elif method == "sampling":
        sol, trace = sampling(
            policy, instance, counter, params.get("seed", 0), params.get("chunk", 512), trace
        )
    elif method == "beam":
        sol, trace = nlp_beam_search(policy, instance, params.get("width", budget), counter, trace=trace)
    elif method == "mcts":
        sol, trace = mcts_search(policy, instance, params.get("config", MctsConfig()), counter, trace=trace)
    elif method == "sgbs":
        sol, trace = sgbs(policy, instance, params.get("config", SgbsConfig()), counter, trace=trace)
    elif method in ("active-search", "eas", "sgbs+eas"):
        fn = {"active-search": active_search, "eas": eas, "sgbs+eas": sgbs_eas}[method]
        sol, trace = fn(policy, instance, params.get("config", EasConfig()), counter, trace)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return BudgetReport(
        method=method,
        solution=sol,
        consumed=counter.used,
        budget=budget,
        truncated=trace.truncated,
        curve=[(c, cost) for c, cost, _, _ in trace.rows],
        trace=trace,
    )
