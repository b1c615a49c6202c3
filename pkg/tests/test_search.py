import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgbs.policy import Policy, PolicyParams, log_prob
from sgbs.problems import (
    TspInstance,
    apply_action,
    brute_force_optimum,
    initial_state,
    make_env,
    replay,
    reward,
)
from sgbs.search import (
    METHODS,
    Budget,
    MctsConfig,
    SgbsConfig,
    exploration_bonus,
    greedy_rollout,
    mcts_search,
    nlp_beam_search,
    run_with_budget,
    sample_rollouts,
    sgbs,
)

from conftest import instances, small_generator


def nn_policy(n_features=3, temperature=0.1):
    return Policy(PolicyParams.initial(n_features, temperature))


def nearest_neighbour_tour(coords):
    left = set(range(1, len(coords)))
    cur, tour = 0, []
    while left:
        nxt = min(left, key=lambda j: (np.hypot(*(coords[cur] - coords[j])), j))
        tour.append(nxt)
        left.remove(nxt)
        cur = nxt
    return tuple(tour)


def policy_for(inst, rng=None):
    f = make_env(inst, 1).n_features
    if rng is None:
        return Policy(PolicyParams.initial(f))
    return Policy(PolicyParams(rng.normal(size=f), float(rng.uniform(0.05, 1.0))))


# -- greedy / sampling ------------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_greedy_is_nearest_neighbour(seed):
    inst = small_generator("TSP", 15, seed)(0)
    sol = greedy_rollout(nn_policy(), initial_state(inst))
    assert sol.actions == nearest_neighbour_tour(inst.coords)
    assert sol.reward == reward(inst, sol.actions)


@given(instances())
def test_greedy_deterministic_and_terminal_fixed_point(inst):
    pol = policy_for(inst)
    a = greedy_rollout(pol, initial_state(inst))
    b = greedy_rollout(pol, initial_state(inst))
    assert a == b
    done = replay(inst, a.actions)
    assert greedy_rollout(pol, done) == a


def two_way_state(p_first):
    # logits -d/T with T = 0.1, so d2 - d1 = 0.1 * ln(p1 / p2)
    gap = 0.1 * math.log(p_first / (1 - p_first))
    return initial_state(TspInstance(np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1 + gap]])))


def test_sampling_frequencies():
    state = two_way_state(0.7)
    sols = sample_rollouts(nn_policy(), state, 10000, np.random.default_rng(0))
    first = np.mean([s.actions[0] == 1 for s in sols])
    assert abs(first - 0.7) < 0.02


def test_sampling_seeded():
    inst = small_generator("CVRP", 6, 1)(0)
    state = initial_state(inst)
    a = sample_rollouts(policy_for(inst), state, 20, np.random.default_rng(5))
    b = sample_rollouts(policy_for(inst), state, 20, np.random.default_rng(5))
    assert a == b


# FFSP has integer processing times, hence exact logit ties that sampling splits
@pytest.mark.parametrize("kind", ["TSP", "CVRP"])
def test_cold_sampling_is_greedy(kind):
    inst = small_generator(kind, 5, 2)(0)
    f = make_env(inst, 1).n_features
    pol = Policy(PolicyParams.initial(f, 1e-6))
    greedy = greedy_rollout(pol, initial_state(inst))
    sols = sample_rollouts(pol, initial_state(inst), 50, np.random.default_rng(0))
    assert all(s.actions == greedy.actions for s in sols)


def test_sample_rollouts_from_midway():
    inst = small_generator("TSP", 6, 0)(0)
    state = apply_action(initial_state(inst), 3)
    sols = sample_rollouts(nn_policy(), state, 10, np.random.default_rng(0))
    assert all(s.actions[0] == 3 and len(s.actions) == 5 for s in sols)
    with pytest.raises(ValueError):
        sample_rollouts(nn_policy(), state, 0, np.random.default_rng(0))


# -- beam search ------------------------------------------------------------


@given(instances())
@settings(max_examples=40)
def test_beam_width_one_is_greedy(inst):
    pol = policy_for(inst)
    sol, trace = nlp_beam_search(pol, inst, 1)
    assert sol == greedy_rollout(pol, initial_state(inst))
    assert trace.consumed == 1


@pytest.mark.parametrize("seed", range(5))
def test_wide_beam_is_optimal_on_tsp5(seed):
    inst = small_generator("TSP", 5, seed)(0)
    sol, trace = nlp_beam_search(nn_policy(), inst, 24)
    assert trace.consumed == 24
    assert -sol.reward == pytest.approx(-brute_force_optimum(inst).reward, abs=1e-12)


@given(instances(), st.integers(1, 6))
@settings(max_examples=40)
def test_beam_logprob_bookkeeping(inst, width):
    pol = policy_for(inst, np.random.default_rng(width))
    _, trace = nlp_beam_search(pol, inst, width)
    for acts, cum in zip(trace.extra["solutions"], trace.extra["cum_logp"]):
        state, total = initial_state(inst), 0.0
        for a in acts:
            total += log_prob(pol.params, None, state, a)
            state = apply_action(state, a)
        assert abs(total - cum) < 1e-9
    assert trace.extra["cum_logp"] == sorted(trace.extra["cum_logp"], reverse=True)


def test_beam_rejects_zero_width():
    with pytest.raises(ValueError):
        nlp_beam_search(nn_policy(), small_generator("TSP", 4, 0)(0), 0)


# -- sgbs -------------------------------------------------------------------


@given(instances())
@settings(max_examples=40)
def test_sgbs_one_one_is_greedy(inst):
    pol = policy_for(inst)
    sol, trace = sgbs(pol, inst, SgbsConfig(1, 1))
    assert sol == greedy_rollout(pol, initial_state(inst))
    assert trace.consumed == 1


@given(instances(), st.integers(1, 5), st.integers(1, 5), st.booleans())
@settings(max_examples=60)
def test_sgbs_dominates_greedy(inst, beta, gamma, random_policy):
    pol = policy_for(inst, np.random.default_rng(beta * 7 + gamma) if random_policy else None)
    sol, _ = sgbs(pol, inst, SgbsConfig(beta, gamma))
    assert sol.reward >= greedy_rollout(pol, initial_state(inst)).reward
    assert reward(inst, sol.actions) == sol.reward


@pytest.mark.parametrize(
    "kind,size,beta",
    [("TSP", 6, 120), ("CVRP", 4, 10**4), ("FFSP", 3, 10**4)],
)
def test_sgbs_exhaustive_is_optimal(kind, size, beta):
    for seed in range(3):
        inst = small_generator(kind, size, seed)(0)
        sol, _ = sgbs(policy_for(inst), inst, SgbsConfig(beta, 100))
        assert -sol.reward == pytest.approx(-brute_force_optimum(inst).reward, abs=1e-9)


@given(instances(), st.integers(1, 6), st.integers(1, 6))
@settings(max_examples=40)
def test_sgbs_rollout_accounting(inst, beta, gamma):
    _, trace = sgbs(policy_for(inst), inst, SgbsConfig(beta, gamma))
    levels = trace.extra["level_rollouts"]
    assert sum(levels) == trace.consumed
    assert levels[0] <= gamma
    assert all(n <= beta * (gamma - 1) for n in levels[1:])


def test_sgbs_tsp100_budget_arithmetic():
    inst = small_generator("TSP", 100, 0)(0)
    _, trace = sgbs(nn_policy(), inst, SgbsConfig(4, 4))
    assert 4 + 99 * 3 <= trace.consumed <= 4 + 99 * 4 * 3
    rep = run_with_budget("sgbs", nn_policy(), inst, 1200, config=SgbsConfig(4, 4))
    assert not rep.truncated and rep.consumed == trace.consumed


@given(instances(), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=30)
def test_rollout_reuse_changes_only_cost(inst, beta, gamma):
    pol = policy_for(inst, np.random.default_rng(beta + 10 * gamma))
    a, ta = sgbs(pol, inst, SgbsConfig(beta, gamma))
    b, tb = sgbs(pol, inst, SgbsConfig(beta, gamma, reuse_argmax_rollout=False))
    assert a == b
    assert ta.consumed <= tb.consumed


def test_sgbs_literal_mode_returns_final_beam():
    inst = small_generator("TSP", 9, 4)(0)
    pol = nn_policy()
    tracked, _ = sgbs(pol, inst, SgbsConfig(2, 3))
    literal, _ = sgbs(pol, inst, SgbsConfig(2, 3, track_incumbent=False))
    assert tracked.reward >= literal.reward


@given(instances(), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=20)
def test_sgbs_deterministic(inst, beta, gamma):
    pol = policy_for(inst)
    a, ta = sgbs(pol, inst, SgbsConfig(beta, gamma))
    b, tb = sgbs(pol, inst, SgbsConfig(beta, gamma))
    assert a == b
    assert [r[:2] for r in ta.rows] == [r[:2] for r in tb.rows]
    assert ta.extra == tb.extra


def test_sgbs_mean_reward_grows_with_beta(tsp20_params):
    gen = small_generator("TSP", 20, 77)
    insts = [gen(i) for i in range(50)]
    pol = Policy(tsp20_params)
    means = [np.mean([sgbs(pol, x, SgbsConfig(b, 4))[0].reward for x in insts]) for b in (1, 2, 4, 8)]
    assert all(x <= y for x, y in zip(means, means[1:]))


def test_sgbs_truncation():
    inst = small_generator("TSP", 12, 0)(0)
    budget = Budget(10)
    sol, trace = sgbs(nn_policy(), inst, SgbsConfig(4, 4), budget)
    assert trace.truncated and trace.consumed == 10 and budget.used == 10
    assert reward(inst, sol.actions) == sol.reward


def test_sgbs_config_validation():
    with pytest.raises(ValueError):
        SgbsConfig(0, 4)
    with pytest.raises(ValueError):
        SgbsConfig(4, 0)


# -- mcts -------------------------------------------------------------------


def test_exploration_bonus_examples():
    u = exploration_bonus(1.0, [0.5, 0.5], [1, 0])
    assert abs(u[0] - 0.5 / 1.1) < 1e-12 and abs(u[1] - 5.0) < 1e-12
    assert np.array_equal(exploration_bonus(1.0, [0.2, 0.3, 0.5], [0, 0, 0]), np.zeros(3))


@given(instances(), st.integers(1, 20))
@settings(max_examples=40)
def test_mcts_visit_conservation_and_q_range(inst, sims):
    _, trace = mcts_search(policy_for(inst), inst, MctsConfig(simulations=sims))
    lo, hi = trace.extra["min_reward"], trace.extra["max_reward"]
    for d in trace.extra["depths"]:
        assert d["visits"] == d["simulations"]
        assert all(lo - 1e-12 <= q <= hi + 1e-12 for q in d["q"])
    assert trace.consumed == sum(d["simulations"] for d in trace.extra["depths"]) or trace.consumed == 1


@given(instances())
@settings(max_examples=40)
def test_mcts_single_simulation_is_greedy(inst):
    pol = policy_for(inst)
    sol, _ = mcts_search(pol, inst, MctsConfig(simulations=1))
    assert sol == greedy_rollout(pol, initial_state(inst))


def test_mcts_truncation_and_validation():
    inst = small_generator("TSP", 10, 0)(0)
    sol, trace = mcts_search(nn_policy(), inst, MctsConfig(), Budget(5))
    assert trace.truncated and trace.consumed == 5
    assert sol is not None
    with pytest.raises(ValueError):
        MctsConfig(offset=0)


# -- budget driver ----------------------------------------------------------


def test_sampling_consumes_exact_budget():
    inst = small_generator("TSP", 10, 0)(0)
    rep = run_with_budget("sampling", nn_policy(), inst, 1200, seed=3, chunk=500)
    assert rep.consumed == 1200 and not rep.truncated


@pytest.mark.parametrize("method", [m for m in METHODS if m not in ("eas", "sgbs+eas", "active-search")])
def test_curves_are_monotone(method):
    inst = small_generator("CVRP", 7, 3)(0)
    rep = run_with_budget(method, policy_for(inst), inst, 200)
    assert rep.consumed <= 200
    counts = [c for c, _ in rep.curve]
    costs = [c for _, c in rep.curve]
    assert counts == sorted(counts)
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == rep.cost


def test_unknown_method():
    with pytest.raises(ValueError):
        run_with_budget("tabu", nn_policy(), small_generator("TSP", 4, 0)(0), 10)
