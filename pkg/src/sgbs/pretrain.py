"""REINFORCE pre-training of the base weights with optional entropy bonus."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .policy import Divergence, Policy, PolicyParams, mean_entropy, trajectory_grad
from .problems import InstanceGenerator, make_env
from .search import rollout

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PretrainConfig:
    lr: float = 0.05
    samples: int = 16  # K trajectories per instance
    instances: int = 256  # training instances per epoch
    batch: int = 16  # instances per gradient step
    epochs: int = 10
    entropy: float = 0.0  # lambda_1
    heldout: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if self.samples < 2:
            raise ValueError("need K >= 2 samples per instance")
        if self.instances < 1 or self.batch < 1 or self.epochs < 0 or self.heldout < 1:
            raise ValueError("instances, batch, heldout must be positive")


@dataclass
class PretrainResult:
    params: PolicyParams
    curve: list = field(default_factory=list)  # (epoch, mean greedy reward on held-out set)
    checkpoints: list = field(default_factory=list)  # PolicyParams after each epoch, epoch 0 first


def heldout_set(gen: InstanceGenerator, count: int) -> list:
    # disjoint stream from the training instances
    hold = dataclasses.replace(gen, seed=gen.seed + 7919)
    return [hold(i) for i in range(count)]


def greedy_rewards(params: PolicyParams, instances) -> np.ndarray:
    pol = Policy(params)
    out = []
    for inst in instances:
        env = make_env(inst, 1)
        rollout.run(env, pol)
        out.append(env.rewards()[0])
    return np.array(out)


def greedy_entropy(params: PolicyParams, instances) -> float:
    """Mean policy entropy over the states visited by the greedy rollouts."""
    pol = Policy(params)
    vals = []
    for inst in instances:
        env = make_env(inst, 1)
        rec = rollout.run(env, pol, record=True)
        vals.append(mean_entropy(params, None, rec))
    return float(np.mean(vals))


def instance_gradient(params: PolicyParams, instance, k: int, entropy: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """REINFORCE gradient for one instance with the batch-mean baseline."""
    env, rec = rollout.sample_batch(Policy(params), instance, k, rng, record=True)
    r = env.rewards()
    g = trajectory_grad(params, None, rec, (r - r.mean()) / k, entropy / k, ("theta",))["theta"]
    return g, r


def pretrain(config: PretrainConfig, generator: InstanceGenerator, params: PolicyParams) -> PretrainResult:
    rng = np.random.default_rng(config.seed)
    heldout = heldout_set(generator, config.heldout)
    params = params.copy()
    res = PretrainResult(params)
    res.curve.append((0, float(greedy_rewards(params, heldout).mean())))
    res.checkpoints.append(params.copy())
    idx = 0
    for epoch in range(1, config.epochs + 1):
        for start in range(0, config.instances, config.batch):
            size = min(config.batch, config.instances - start)
            grad = np.zeros_like(params.theta)
            for _ in range(size):
                g, _ = instance_gradient(params, generator(idx), config.samples, config.entropy, rng)
                grad += g / size
                idx += 1
            theta = params.theta + config.lr * grad
            if not np.isfinite(theta).all():
                raise Divergence(f"non-finite weights at epoch {epoch}: {theta}")
            params = PolicyParams(theta, params.temperature)
        score = float(greedy_rewards(params, heldout).mean())
        res.curve.append((epoch, score))
        res.checkpoints.append(params.copy())
        log.info("epoch %d held-out greedy reward %.5f theta %s", epoch, score, params.theta)
    res.params = params
    return res
