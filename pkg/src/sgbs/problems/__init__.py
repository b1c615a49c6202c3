"""Problem adapters: TSP, CVRP and FFSP behind one interface."""
from __future__ import annotations

from . import cvrp, ffsp, tsp
from .augment import augment_x8
from .base import NEG_INF, BatchEnv, InfeasibleAction, Solution, State, state_from_env
from .cvrp import CvrpEnv, CvrpInstance
from .ffsp import FfspEnv, FfspInstance
from .generate import InstanceGenerator, generate_instance, generate_set
from .io import (
    InstanceFormatError,
    format_instance,
    parse_batch,
    parse_instance,
    parse_text,
    serialize_batch,
    serialize_instance,
)
from .oracles import brute_force_optimum
from .tsp import TspEnv, TspInstance

_ENVS = {TspInstance: TspEnv, CvrpInstance: CvrpEnv, FfspInstance: FfspEnv}
_REWARDS = {TspInstance: tsp.reward, CvrpInstance: cvrp.reward, FfspInstance: ffsp.reward}


def make_env(instance, batch: int = 1) -> BatchEnv:
    try:
        return _ENVS[type(instance)](instance, batch)
    except KeyError:
        raise TypeError(f"unsupported instance {type(instance).__name__}") from None


def initial_state(instance) -> State:
    return state_from_env(make_env(instance, 1))


def is_terminal(state: State) -> bool:
    return state.is_terminal


def feasible_actions(state: State) -> list[int]:
    if state.is_terminal:
        raise ValueError("terminal state has no feasible actions")
    return [int(a) for a in state.env.mask()[0].nonzero()[0]]


def apply_action(state: State, action: int) -> State:
    if state.is_terminal:
        raise InfeasibleAction("cannot extend a terminal state")
    env = state.env.take([0])
    env.step([int(action)])
    return State(state.instance, state.assigned + (int(action),), env)


def replay(instance, actions) -> State:
    env = make_env(instance, 1)
    for a in actions:
        env.step([int(a)])
    return State(instance, tuple(int(a) for a in actions), env)


def reward(instance, solution) -> float:
    """Reward of a complete solution (a ``Solution`` or a bare action tuple)."""
    actions = solution.actions if isinstance(solution, Solution) else solution
    try:
        fn = _REWARDS[type(instance)]
    except KeyError:
        raise TypeError(f"unsupported instance {type(instance).__name__}") from None
    return fn(instance, actions)


def solution_of(state: State) -> Solution:
    if not state.is_terminal:
        raise ValueError("state is not terminal")
    return Solution(state.assigned, reward(state.instance, state.assigned))


__all__ = [
    "NEG_INF",
    "BatchEnv",
    "CvrpEnv",
    "CvrpInstance",
    "FfspEnv",
    "FfspInstance",
    "InfeasibleAction",
    "InstanceFormatError",
    "InstanceGenerator",
    "Solution",
    "State",
    "TspEnv",
    "TspInstance",
    "apply_action",
    "augment_x8",
    "brute_force_optimum",
    "feasible_actions",
    "format_instance",
    "generate_instance",
    "generate_set",
    "initial_state",
    "is_terminal",
    "make_env",
    "parse_batch",
    "parse_instance",
    "parse_text",
    "replay",
    "reward",
    "serialize_batch",
    "serialize_instance",
    "solution_of",
]
