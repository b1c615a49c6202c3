from __future__ import annotations

import numpy as np

from ..policy import Policy, StepRecord
from ..problems import BatchEnv, Solution, State, make_env


def choose_greedy(logp: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index among ties
    return logp.argmax(axis=1)


def choose_sample(logp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = np.exp(logp)
    cdf = np.cumsum(p, axis=1)
    u = rng.random(len(p)) * cdf[:, -1]
    # first index whose cdf exceeds u; zero-probability entries never win
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, p.shape[1] - 1)


def run(
    env: BatchEnv,
    policy: Policy,
    rng: np.random.Generator | None = None,
    record: bool = False,
) -> StepRecord | None:
    """Complete every row of ``env`` in place, greedily or by sampling (``rng``)."""
    steps = []
    while True:
        live = ~env.done()
        if not live.any():
            break
        rows = np.flatnonzero(live)
        feats, mask = env.features(), env.mask()
        if rows.size != env.batch:
            feats, mask = feats[rows], mask[rows]
        logp = policy.log_probs(feats, mask)
        pick = choose_greedy(logp) if rng is None else choose_sample(logp, rng)
        acts = np.zeros(env.batch, dtype=np.int64)
        acts[rows] = pick
        if record:
            steps.append((feats, mask, pick, rows))
        env.step(acts)
    if not record:
        return None
    if not steps:
        nf = env.n_features
        return StepRecord(
            np.zeros((0, env.n_actions, nf)),
            np.zeros((0, env.n_actions), dtype=bool),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
        )
    return StepRecord(
        np.concatenate([s[0] for s in steps]),
        np.concatenate([s[1] for s in steps]),
        np.concatenate([s[2] for s in steps]),
        np.concatenate([s[3] for s in steps]),
    )


def solutions(env: BatchEnv) -> list[Solution]:
    rewards = env.rewards()
    return [Solution(env.row_actions(r), float(rewards[r])) for r in range(env.batch)]


def greedy_rollout(policy: Policy, state: State) -> Solution:
    env = state.env.take([0])
    run(env, policy)
    return Solution(env.row_actions(0), float(env.rewards()[0]))


def sample_batch(policy: Policy, instance, count: int, rng, record: bool = False, start: BatchEnv | None = None):
    """Sample ``count`` trajectories; returns (finished env, step record or None)."""
    env = make_env(instance, count) if start is None else start.take(np.zeros(count, dtype=np.int64))
    rec = run(env, policy, rng=rng, record=record)
    return env, rec


def sample_rollouts(policy: Policy, state: State, count: int, rng) -> list[Solution]:
    if count < 1:
        raise ValueError("count must be >= 1")
    env, _ = sample_batch(policy, state.instance, count, rng, start=state.env)
    return solutions(env)
