"""Test-time adaptation: active search, EAS, and SGBS+EAS.

EAS fine-tunes only the inserted adapter; active search tunes the base
weights.  SGBS+EAS alternates one SGBS run (with the current adapter) and an
EAS update, sharing the incumbent and the adapter between the two.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .policy import (
    Divergence,
    EasParams,
    Policy,
    PolicyParams,
    StepRecord,
    mean_entropy,
    trajectory_grad,
)
from .problems import InfeasibleAction, Solution, make_env
from .search import rollout
from .search.budget import Budget, IncumbentStore, SearchTrace
from .search.sgbs import SgbsConfig, sgbs


@dataclass(frozen=True)
class EasConfig:
    lr: float = 0.1
    imitation: float = 1.0
    samples: int = 32
    entropy: float = 0.0
    max_iterations: int | None = None
    timeout: float | None = None
    sgbs: SgbsConfig = field(default_factory=SgbsConfig)
    eas_steps_per_sgbs: int = 1
    hidden: int = 8
    optimizer: str = "adam"  # or "sgd": the plain step psi += lr * grad
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.lr < 0 or self.imitation < 0 or self.entropy < 0:
            raise ValueError("lr, imitation and entropy weights must be >= 0")
        if self.samples < 2:
            raise ValueError("need at least 2 samples per iteration")
        if self.eas_steps_per_sgbs < 1:
            raise ValueError("eas_steps_per_sgbs must be >= 1")


OPTIMIZERS = ("adam", "sgd")


class Ascent:
    """Turns gradients into ascent steps; Adam keeps per-coordinate moment estimates."""

    B1, B2, EPS = 0.9, 0.999, 1e-8

    def __init__(self, kind: str, lr: float, size: int):
        self.kind = kind
        self.lr = lr
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, grad: np.ndarray) -> np.ndarray:
        if self.kind == "sgd":
            with np.errstate(over="ignore", invalid="ignore"):
                return self.lr * grad
        self.t += 1
        with np.errstate(over="ignore", invalid="ignore"):
            self.m = self.B1 * self.m + (1 - self.B1) * grad
            self.v = self.B2 * self.v + (1 - self.B2) * grad * grad
            m_hat = self.m / (1 - self.B1**self.t)
            v_hat = self.v / (1 - self.B2**self.t)
            return self.lr * m_hat / (np.sqrt(v_hat) + self.EPS)


ADAPT_COLUMNS = (
    "iteration",
    "candidate_count",
    "sgbs_cost",
    "best_sample_cost",
    "incumbent_cost",
    "grad_norm_JRL",
    "grad_norm_JIL",
    "entropy_mean",
)


def record_trajectory(instance, actions) -> StepRecord:
    """Replay ``actions`` and keep the per-step features (they do not depend on the policy)."""
    env = make_env(instance, 1)
    feats, masks = [], []
    for a in actions:
        if env.done()[0]:
            raise InfeasibleAction("trajectory continues past a terminal state")
        feats.append(env.features()[0])
        masks.append(env.mask()[0])
        env.step([int(a)])
    if not env.done()[0]:
        raise InfeasibleAction("trajectory does not reach a terminal state")
    n = len(actions)
    return StepRecord(
        np.array(feats).reshape(n, env.n_actions, env.n_features),
        np.array(masks).reshape(n, env.n_actions),
        np.array(actions, dtype=np.int64),
        np.zeros(n, dtype=np.int64),
    )


def grad_JRL(
    params: PolicyParams,
    eas: EasParams,
    rec: StepRecord,
    rewards: np.ndarray,
    baseline: float | None = None,
    entropy_coef: float = 0.0,
) -> EasParams:
    """(1/M) sum_i (R_i - b) sum_d grad log pi + entropy_coef (1/M) sum_i sum_d grad H."""
    rewards = np.asarray(rewards, dtype=np.float64)
    m = len(rewards)
    if m < 2:
        raise ValueError("REINFORCE needs at least 2 samples")
    b = rewards.mean() if baseline is None else baseline
    return trajectory_grad(params, eas, rec, (rewards - b) / m, entropy_coef / m, ("psi",))["psi"]


def grad_JIL(params: PolicyParams, eas: EasParams, instance, incumbent: Solution, rec: StepRecord | None = None) -> EasParams:
    """sum_d grad log pi(a*_d | s*_d) along the incumbent."""
    if rec is None:
        rec = record_trajectory(instance, incumbent.actions)
    return trajectory_grad(params, eas, rec, np.ones(1), 0.0, ("psi",))["psi"]


def _ascend(eas: EasParams, step: np.ndarray) -> EasParams:
    with np.errstate(over="ignore", invalid="ignore"):
        new = eas.with_vector(eas.vector() + step)
    new.version = eas.version + 1
    if not new.is_finite():
        raise Divergence("adapter parameters became non-finite")
    return new


class _Loop:
    """Shared bookkeeping for the adaptive methods."""

    def __init__(self, instance, config: EasConfig, budget: Budget | None, trace: SearchTrace | None):
        self.instance = instance
        self.config = config
        self.budget = budget if budget is not None else Budget()
        self.trace = trace if trace is not None else SearchTrace()
        self.incumbent = IncumbentStore()
        self.rng = np.random.default_rng(config.seed)
        self.start = time.monotonic()
        self.rows = self.trace.extra.setdefault("iterations", [])
        self.used_at_start = self.budget.used
        self.consumed_before = self.trace.consumed
        self._il_cache: tuple | None = None

    def offer(self, sol: Solution, iteration: int, source: str) -> None:
        if self.incumbent.update(sol, iteration, source):
            self.trace.record(self.budget.used, self.incumbent, source)

    def keep_going(self, it: int) -> bool:
        c = self.config
        if self.budget.exhausted:
            return False
        if c.max_iterations is not None and it >= c.max_iterations:
            return False
        # checked between iterations only
        if c.timeout is not None and time.monotonic() - self.start > c.timeout:
            return False
        return True

    def greedy_start(self, policy: Policy) -> bool:
        if not self.budget.take(1):
            self.trace.truncated = True
            return False
        env = make_env(self.instance, 1)
        rollout.run(env, policy)
        self.offer(Solution(env.row_actions(0), float(env.rewards()[0])), -1, "greedy")
        return True

    def sample(self, policy: Policy, it: int):
        m = self.budget.take(self.config.samples)
        if m == 0:
            return None
        env, rec = rollout.sample_batch(policy, self.instance, m, self.rng, record=True)
        rewards = env.rewards()
        best = int(np.argmax(rewards))
        self.offer(Solution(env.row_actions(best), float(rewards[best])), it, "sample")
        return rewards, rec

    def incumbent_record(self) -> StepRecord:
        acts = self.incumbent.solution.actions
        if self._il_cache is None or self._il_cache[0] != acts:
            self._il_cache = (acts, record_trajectory(self.instance, acts))
        return self._il_cache[1]

    def finish(self) -> tuple[Solution, SearchTrace]:
        # assigned, not added: embedded SGBS calls also count into the trace
        self.trace.consumed = self.consumed_before + self.budget.used - self.used_at_start
        return self.incumbent.solution, self.trace


def _eas_loop(policy: Policy, instance, config: EasConfig, budget, trace, with_sgbs: bool):
    params = policy.params
    n_features = make_env(instance, 1).n_features
    adapter = EasParams.insert(n_features, config.hidden, seed=config.seed)
    loop = _Loop(instance, config, budget, trace)
    versions = loop.trace.extra.setdefault("sgbs_versions", [])
    opt = Ascent(config.optimizer, config.lr, adapter.vector().size)
    if not loop.greedy_start(Policy(params, adapter)):
        return loop.finish()
    it = 0
    while loop.keep_going(it):
        sgbs_cost = float("nan")
        if with_sgbs:
            versions.append(adapter.version)
            s0, _ = sgbs(
                Policy(params, adapter), instance, config.sgbs, loop.budget, loop.incumbent,
                loop.trace, phase="sgbs", iteration=it,
            )
            if s0 is not None:
                sgbs_cost = -s0.reward
        for _ in range(config.eas_steps_per_sgbs):
            pol = Policy(params, adapter)
            batch = loop.sample(pol, it)
            if batch is None:
                loop.trace.truncated = True
                break
            rewards, rec = batch
            g_rl = adapter.zeros_like()
            if len(rewards) >= 2:
                g_rl = grad_JRL(params, adapter, rec, rewards, entropy_coef=config.entropy)
            g_il = grad_JIL(params, adapter, instance, loop.incumbent.solution, loop.incumbent_record())
            loop.rows.append(
                {
                    "iteration": it,
                    "candidate_count": loop.budget.used,
                    "sgbs_cost": sgbs_cost,
                    "best_sample_cost": float(-rewards.max()),
                    "incumbent_cost": -loop.incumbent.reward,
                    "grad_norm_JRL": g_rl.norm(),
                    "grad_norm_JIL": g_il.norm(),
                    "entropy_mean": mean_entropy(params, adapter, rec),
                }
            )
            with np.errstate(over="ignore", invalid="ignore"):  # _ascend reports it
                grad = g_rl.vector() + config.imitation * g_il.vector()
            adapter = _ascend(adapter, opt.step(grad))
            sgbs_cost = float("nan")
        it += 1
    loop.trace.extra["adapter"] = adapter
    return loop.finish()


def eas(policy: Policy, instance, config: EasConfig = EasConfig(), budget: Budget | None = None, trace=None):
    """Efficient active search: adapter-only REINFORCE plus imitation of the incumbent."""
    return _eas_loop(policy, instance, config, budget, trace, with_sgbs=False)


def sgbs_eas(policy: Policy, instance, config: EasConfig = EasConfig(), budget: Budget | None = None, trace=None):
    return _eas_loop(policy, instance, config, budget, trace, with_sgbs=True)


def active_search(
    policy: Policy, instance, config: EasConfig = EasConfig(), budget: Budget | None = None, trace=None
):
    """REINFORCE on the base weights for one instance, no adapter, no imitation."""
    params = policy.params.copy()
    loop = _Loop(instance, config, budget, trace)
    opt = Ascent(config.optimizer, config.lr, params.theta.size)
    it = 0
    while loop.keep_going(it):
        batch = loop.sample(Policy(params), it)
        if batch is None:
            break
        rewards, rec = batch
        if len(rewards) >= 2:
            m = len(rewards)
            g = trajectory_grad(
                params, None, rec, (rewards - rewards.mean()) / m, config.entropy / m, ("theta",)
            )["theta"]
            params = PolicyParams(params.theta + opt.step(g), params.temperature)
            if not np.isfinite(params.theta).all():
                raise Divergence("policy weights became non-finite")
        loop.rows.append(
            {
                "iteration": it,
                "candidate_count": loop.budget.used,
                "best_sample_cost": float(-rewards.max()),
                "incumbent_cost": -loop.incumbent.reward,
            }
        )
        it += 1
    loop.trace.extra["params"] = params
    return loop.finish()


def imitate(policy: Policy, instance, incumbent: Solution, steps: int, config: EasConfig = EasConfig()) -> EasParams:
    """J_IL-only ascent on a fresh adapter, the large-lambda limit of the EAS update."""
    params = policy.params
    adapter = EasParams.insert(make_env(instance, 1).n_features, config.hidden, seed=config.seed)
    opt = Ascent(config.optimizer, config.lr, adapter.vector().size)
    rec = record_trajectory(instance, incumbent.actions)
    for _ in range(steps):
        adapter = _ascend(adapter, opt.step(grad_JIL(params, adapter, instance, incumbent, rec).vector()))
    return adapter


def write_adaptation_csv(trace: SearchTrace, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ADAPT_COLUMNS)
        for row in trace.extra.get("iterations", []):
            w.writerow([row.get(c, "") for c in ADAPT_COLUMNS])


__all__ = [
    "Ascent",
    "Divergence",
    "EasConfig",
    "IncumbentStore",
    "active_search",
    "eas",
    "grad_JIL",
    "grad_JRL",
    "imitate",
    "record_trajectory",
    "sgbs_eas",
    "write_adaptation_csv",
]
