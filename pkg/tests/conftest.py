from importlib import resources

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from sgbs.policy import parse_checkpoint
from sgbs.problems import InstanceGenerator, feasible_actions, initial_state, apply_action

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

KINDS = ("TSP", "CVRP", "FFSP")
SMALL = {"TSP": (3, 9), "CVRP": (1, 7), "FFSP": (1, 5)}


def small_generator(kind: str, size: int, seed: int) -> InstanceGenerator:
    if kind == "FFSP":
        return InstanceGenerator(kind, size, seed, num_stages=2, machines_per_stage=2)
    return InstanceGenerator(kind, size, seed)


@st.composite
def instances(draw, kinds=KINDS):
    kind = draw(st.sampled_from(kinds))
    lo, hi = SMALL[kind]
    size = draw(st.integers(lo, hi))
    seed = draw(st.integers(0, 2**32 - 1))
    return small_generator(kind, size, seed)(draw(st.integers(0, 50)))


def random_walk(instance, rng):
    """A complete construction chosen uniformly among feasible actions."""
    state = initial_state(instance)
    states = [state]
    while not state.is_terminal:
        acts = feasible_actions(state)
        state = apply_action(state, acts[rng.integers(len(acts))])
        states.append(state)
    return states


def builtin(name: str):
    params, _ = parse_checkpoint(resources.files("sgbs.data").joinpath(f"{name}.txt").read_text())
    return params


@pytest.fixture(scope="session")
def tsp10_params():
    return builtin("tsp10")


@pytest.fixture(scope="session")
def tsp20_params():
    return builtin("tsp20")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fuzz_case(rng, kinds=KINDS):
    """Random non-terminal state with random base weights and adapter."""
    from sgbs.policy import EasParams, PolicyParams

    kind = kinds[rng.integers(len(kinds))]
    lo, hi = SMALL[kind]
    inst = small_generator(kind, int(rng.integers(max(lo, 2), hi + 1)), int(rng.integers(2**31)))(0)
    states = random_walk(inst, rng)[:-1]
    state = states[rng.integers(len(states))]
    f = state.env.n_features
    params = PolicyParams(rng.normal(size=f), float(rng.uniform(0.2, 2.0)))
    eas = EasParams(
        rng.normal(size=(8, f)), rng.normal(0, 0.5, size=8), rng.normal(size=8), float(rng.normal())
    )
    return params, eas, state


ACCEPTANCE: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
