"""Simulation-guided beam search.

Each level has three phases:

* expansion: every non-terminal beam node keeps its ``gamma`` most probable
  children, ranked per node (nodes are not pooled by cumulative probability);
* simulation: each kept child is scored by the reward of a greedy rollout.
  The most probable child's rollout is the parent's own rollout, so it is
  reused instead of recomputed, except at the root;
* pruning: the ``beta`` best-scoring children survive.  Terminal beam nodes
  compete unchanged alongside the new children.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..policy import Policy
from ..problems import BatchEnv, Solution, make_env
from . import rollout
from .budget import Budget, IncumbentStore, SearchTrace


@dataclass(frozen=True)
class SgbsConfig:
    beta: int = 4
    gamma: int = 4
    track_incumbent: bool = True
    reuse_argmax_rollout: bool = True

    def __post_init__(self):
        if self.beta < 1 or self.gamma < 1:
            raise ValueError("beta and gamma must be >= 1")


def _prune_order(rewards, cum_logp, env: BatchEnv, keep: int) -> list[int]:
    # reward desc, cumulative log-prob desc, action tuple asc
    rows = range(env.batch)
    keyed = sorted(rows, key=lambda r: (-rewards[r], -cum_logp[r], env.row_actions(r)))
    return keyed[:keep]


def sgbs(
    policy: Policy,
    instance,
    config: SgbsConfig = SgbsConfig(),
    budget: Budget | None = None,
    incumbent: IncumbentStore | None = None,
    trace: SearchTrace | None = None,
    phase: str = "sgbs",
    iteration: int = 0,
) -> tuple[Solution, SearchTrace]:
    budget = budget if budget is not None else Budget()
    incumbent = incumbent if incumbent is not None else IncumbentStore()
    trace = trace if trace is not None else SearchTrace()
    # Local best, so the returned solution is this search's own result even
    # when the caller shares a store across phases.
    local = IncumbentStore()
    levels = trace.extra.setdefault("level_rollouts", [])
    used_at_start = budget.used

    def offer(sol: Solution):
        local.update(sol, iteration, phase)
        if config.track_incumbent and incumbent.update(sol, iteration, phase):
            trace.record(budget.used, incumbent, phase)

    beam = make_env(instance, 1)
    sim_reward = np.zeros(1)
    cum_logp = np.zeros(1)
    at_root = True
    while not beam.done().all():
        done = beam.done()
        live = np.flatnonzero(~done)
        logp = policy.log_probs(beam.features()[live], beam.mask()[live])

        # Expansion
        order = np.argsort(-logp, axis=1, kind="stable")
        n_feas = np.isfinite(logp).sum(axis=1)
        parents, acts, ranks = [], [], []
        for i, r in enumerate(live):
            k = min(config.gamma, int(n_feas[i]))
            parents += [r] * k
            acts += order[i, :k].tolist()
            ranks += list(range(k))
        parents = np.array(parents)
        acts = np.array(acts)
        ranks = np.array(ranks)
        live_pos = np.full(beam.batch, -1)
        live_pos[live] = np.arange(len(live))
        children = beam.take(parents)
        children.step(acts)
        child_cum = cum_logp[parents] + logp[live_pos[parents], acts]

        # Simulation
        child_reward = np.empty(children.batch)
        fresh = (ranks > 0) | at_root | (not config.reuse_argmax_rollout)
        child_reward[~fresh] = sim_reward[parents[~fresh]]
        need = np.flatnonzero(fresh)
        granted = budget.take(len(need))
        if granted < len(need):
            trace.truncated = True
            need = need[:granted]
        if len(need):
            sim = children.take(need)
            rollout.run(sim, policy)
            rew = sim.rewards()
            child_reward[need] = rew
            for j in range(sim.batch):
                offer(Solution(sim.row_actions(j), float(rew[j])))
        levels.append(len(need))
        if trace.truncated:
            break

        # Pruning
        term = np.flatnonzero(done)
        if len(term):
            pool = BatchEnv.concat([children, beam.take(term)])
            pool_reward = np.concatenate([child_reward, sim_reward[term]])
            pool_cum = np.concatenate([child_cum, cum_logp[term]])
        else:
            pool, pool_reward, pool_cum = children, child_reward, child_cum
        keep = _prune_order(pool_reward, pool_cum, pool, config.beta)
        beam = pool.take(keep)
        beam.compact()
        sim_reward = pool_reward[keep]
        cum_logp = pool_cum[keep]
        at_root = False

    trace.consumed += budget.used - used_at_start
    if trace.truncated:
        return local.solution or incumbent.solution, trace
    final = beam.rewards()
    best = _prune_order(final, cum_logp, beam, 1)[0]
    beam_best = Solution(beam.row_actions(best), float(final[best]))
    if config.track_incumbent:
        local.update(beam_best, iteration, phase)
        return local.solution, trace
    return beam_best, trace
