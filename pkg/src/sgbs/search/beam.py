"""Beam search ranked by cumulative log-probability from the root."""
from __future__ import annotations

import numpy as np

from ..policy import Policy
from ..problems import BatchEnv, Solution, make_env
from .budget import Budget, IncumbentStore, SearchTrace


def nlp_beam_search(
    policy: Policy,
    instance,
    width: int,
    budget: Budget | None = None,
    incumbent: IncumbentStore | None = None,
    trace: SearchTrace | None = None,
) -> tuple[Solution, SearchTrace]:
    if width < 1:
        raise ValueError("width must be >= 1")
    budget = budget if budget is not None else Budget()
    incumbent = incumbent if incumbent is not None else IncumbentStore()
    trace = trace if trace is not None else SearchTrace()

    beam = make_env(instance, 1)
    cum = np.zeros(1)
    while not beam.done().all():
        done = beam.done()
        live = np.flatnonzero(~done)
        logp = policy.log_probs(beam.features()[live], beam.mask()[live])
        li, a = np.nonzero(np.isfinite(logp))
        cand_parent = np.concatenate([live[li], np.flatnonzero(done)])
        cand_act = np.concatenate([a, np.full(done.sum(), -1)])
        cand_score = np.concatenate([cum[live[li]] + logp[li, a], cum[done]])
        # score desc, then parent position, then action index
        order = np.lexsort((cand_act, cand_parent, -cand_score))[:width]
        parent, act = cand_parent[order], cand_act[order]
        nxt = beam.take(parent)
        step = np.where(act >= 0, act, 0)
        nxt.step(step)
        beam, cum = nxt, cand_score[order]
        beam.compact()

    rewards = beam.rewards()
    n = budget.take(beam.batch)
    if n < beam.batch:
        trace.truncated = True
    best = None
    for r in range(n):
        sol = Solution(beam.row_actions(r), float(rewards[r]))
        if best is None or sol.reward > best.reward:
            best = sol
        if incumbent.update(sol, 0, "beam"):
            trace.record(budget.used - n + r + 1, incumbent, "beam")
    trace.consumed += n
    trace.extra["cum_logp"] = cum[:n].tolist()
    trace.extra["solutions"] = [beam.row_actions(r) for r in range(n)]
    return best if best is not None else incumbent.solution, trace
