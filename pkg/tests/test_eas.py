import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgbs.eas import (
    ADAPT_COLUMNS,
    Ascent,
    EasConfig,
    _ascend,
    active_search,
    eas,
    grad_JIL,
    grad_JRL,
    imitate,
    record_trajectory,
    sgbs_eas,
    write_adaptation_csv,
)
from sgbs.policy import Divergence, EasParams, Policy, PolicyParams, StepRecord, trajectory_log_prob
from sgbs.problems import InfeasibleAction, Solution, TspInstance, initial_state, make_env
from sgbs.search import Budget, SgbsConfig, greedy_rollout, run_with_budget, sgbs
from sgbs.search.rollout import sample_batch

from conftest import instances, small_generator


def random_adapter(f, rng, scale=0.5):
    return EasParams(rng.normal(size=(8, f)), rng.normal(0, 0.5, size=8), rng.normal(0, scale, size=8), 0.0)


def batch_for(inst, params, eas_p, m, seed):
    env, rec = sample_batch(Policy(params, eas_p), inst, m, np.random.default_rng(seed), record=True)
    return env.rewards(), rec


def surrogate(params, eas_p, rec, rewards):
    """Monte-Carlo objective on frozen samples, in extended precision."""
    m = len(rewards)
    adv = rewards - rewards.mean()
    wide = StepRecord(rec.feats.astype(np.longdouble), rec.mask, rec.actions, rec.row)
    return (adv * trajectory_log_prob(params, eas_p, wide, m)).sum() / m


def test_equal_rewards_give_zero_gradient():
    inst = small_generator("TSP", 6, 0)(0)
    f = make_env(inst, 1).n_features
    params, ad = PolicyParams.initial(f), random_adapter(f, np.random.default_rng(0))
    _, rec = batch_for(inst, params, ad, 8, 0)
    g = grad_JRL(params, ad, rec, np.full(8, -3.0))
    assert not g.vector().any()


def test_jrl_needs_two_samples():
    inst = small_generator("TSP", 6, 0)(0)
    f = make_env(inst, 1).n_features
    params, ad = PolicyParams.initial(f), EasParams.insert(f)
    rewards, rec = batch_for(inst, params, ad, 1, 0)
    with pytest.raises(ValueError):
        grad_JRL(params, ad, rec, rewards)


@given(instances(), st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_jrl_matches_surrogate_finite_differences(inst, seed):
    rng = np.random.default_rng(seed)
    f = make_env(inst, 1).n_features
    params = PolicyParams(rng.normal(size=f), 0.5)
    ad = random_adapter(f, rng)
    rewards, rec = batch_for(inst, params, ad, 6, seed)
    g = grad_JRL(params, ad, rec, rewards).vector()
    base = ad.vector().astype(np.longdouble)
    h = np.longdouble(1e-5)
    num = np.empty(base.size, dtype=np.longdouble)
    for i in range(base.size):
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        num[i] = (surrogate(params, ad.with_vector(up), rec, rewards) - surrogate(params, ad.with_vector(dn), rec, rewards)) / (2 * h)
    den = np.maximum(np.maximum(abs(g), abs(num)), 1e-8)
    assert float((abs(g - num) / den).max()) < 1e-4


def test_dominant_sample_gains_probability():
    inst = small_generator("TSP", 8, 3)(0)
    f = make_env(inst, 1).n_features
    params, ad = PolicyParams.initial(f, 0.5), random_adapter(f, np.random.default_rng(1))
    rewards, rec = batch_for(inst, params, ad, 8, 2)
    rewards = np.zeros(8)
    rewards[5] = 1.0
    step = grad_JRL(params, ad, rec, rewards).vector()
    before = trajectory_log_prob(params, ad, rec, 8)[5]
    after = trajectory_log_prob(params, ad.with_vector(ad.vector() + 1e-4 * step), rec, 8)[5]
    assert after > before


@given(instances(), st.integers(0, 2**31 - 1))
@settings(max_examples=40)
def test_imitation_step_raises_incumbent_logprob(inst, seed):
    rng = np.random.default_rng(seed)
    f = make_env(inst, 1).n_features
    params = PolicyParams(rng.normal(size=f), float(rng.uniform(0.2, 2)))
    ad = random_adapter(f, rng)
    env, _ = sample_batch(Policy(params, ad), inst, 1, rng)
    inc = Solution(env.row_actions(0), float(env.rewards()[0]))
    rec = record_trajectory(inst, inc.actions)
    g = grad_JIL(params, ad, inst, inc)
    before = trajectory_log_prob(params, ad, rec, 1)[0]
    after = trajectory_log_prob(params, ad.with_vector(ad.vector() + 1e-4 * g.vector()), rec, 1)[0]
    assert after >= before


def test_imitation_of_greedy_under_sharp_policy_is_tiny():
    inst = small_generator("TSP", 8, 1)(0)
    params = PolicyParams.initial(3, 1e-3)
    ad = EasParams.insert(3, seed=0)
    inc = greedy_rollout(Policy(params, ad), initial_state(inst))
    other = Solution(inc.actions[::-1], 0.0)
    near = grad_JIL(params, ad, inst, inc).norm()
    assert near < 1e-2
    assert grad_JIL(params, ad, inst, other).norm() > 100 * near


def test_corrupted_incumbent_rejected():
    inst = small_generator("TSP", 5, 0)(0)
    params, ad = PolicyParams.initial(3), EasParams.insert(3)
    with pytest.raises(InfeasibleAction):
        grad_JIL(params, ad, inst, Solution((1, 1, 2, 3), -1.0))
    with pytest.raises(InfeasibleAction):
        grad_JIL(params, ad, inst, Solution((1, 2), -1.0))


def test_fixed_point_without_signal():
    # both tours visit the same edge lengths in the same order, so rewards tie exactly
    inst = TspInstance(np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]))
    pol = Policy(PolicyParams.initial(3))
    _, trace = eas(pol, inst, EasConfig(imitation=0.0, max_iterations=5))
    ad = trace.extra["adapter"]
    assert np.array_equal(ad.vector(), EasParams.insert(3, seed=0).vector())
    assert ad.version == 5


def test_ascend_stamps_and_diverges():
    ad = EasParams.insert(3)
    nxt = _ascend(ad, np.ones(ad.vector().size))
    assert nxt.version == 1 and ad.version == 0
    with pytest.raises(Divergence):
        _ascend(ad, np.full(ad.vector().size, np.inf))


def test_huge_learning_rate_diverges():
    inst = small_generator("TSP", 10, 0)(0)
    with pytest.raises(Divergence):
        eas(Policy(PolicyParams.initial(3, 0.5)), inst, EasConfig(lr=1e308, max_iterations=5), Budget(1000))


@pytest.mark.parametrize("method", [eas, sgbs_eas, active_search])
def test_budget_conservation(method):
    inst = small_generator("CVRP", 8, 2)(0)
    budget = Budget(500)
    sol, trace = method(Policy(PolicyParams.initial(5, 0.3)), inst, EasConfig(samples=16), budget)
    assert budget.used == trace.consumed <= 500
    costs = [r[1] for r in trace.rows]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == sol.cost


def test_sgbs_sees_previous_update():
    inst = small_generator("TSP", 8, 0)(0)
    _, trace = sgbs_eas(Policy(PolicyParams.initial(3)), inst, EasConfig(eas_steps_per_sgbs=3, max_iterations=6))
    assert trace.extra["sgbs_versions"] == [3 * t for t in range(6)]


@pytest.mark.parametrize("beta,gamma", [(4, 4), (2, 3), (1, 5)])
def test_iteration_cost_bound(beta, gamma):
    n, m = 12, 16
    inst = small_generator("TSP", n, 1)(0)
    budget = Budget()
    cfg = EasConfig(samples=m, sgbs=SgbsConfig(beta, gamma), max_iterations=1)
    sgbs_eas(Policy(PolicyParams.initial(3)), inst, cfg, budget)
    # the greedy start costs one unit before the first iteration
    assert budget.used - 1 <= gamma + (n - 2) * beta * (gamma - 1) + m


def test_frozen_sgbs_eas_repeats_sgbs():
    inst = small_generator("TSP", 10, 5)(0)
    pol = Policy(PolicyParams.initial(3))
    cfg = EasConfig(lr=0.0, imitation=0.0, max_iterations=4)
    _, trace = sgbs_eas(pol, inst, cfg)
    plain, _ = sgbs(pol, inst, cfg.sgbs)
    costs = [r["sgbs_cost"] for r in trace.extra["iterations"]]
    assert costs == [plain.cost] * 4
    assert -trace.rows[-1][1] >= plain.reward


def test_zero_rate_eas_matches_sampling_draws():
    inst = small_generator("TSP", 9, 4)(0)
    pol = Policy(PolicyParams.initial(3, 0.3))
    sol, trace = eas(pol, inst, EasConfig(lr=0.0, samples=10, max_iterations=3, seed=9), Budget(31))
    rng = np.random.default_rng(9)
    best = greedy_rollout(pol, initial_state(inst)).reward
    for _ in range(3):
        env, _ = sample_batch(pol, inst, 10, rng)
        best = max(best, env.rewards().max())
    assert sol.reward == best


def test_zero_rate_active_search_is_sampling():
    inst = small_generator("TSP", 9, 4)(0)
    pol = Policy(PolicyParams.initial(3, 0.3))
    a = run_with_budget("active-search", pol, inst, 320, config=EasConfig(lr=0.0, seed=3))
    s = run_with_budget("sampling", pol, inst, 320, seed=3, chunk=32)
    assert a.solution == s.solution


def test_first_iteration_samples_base_policy():
    # fresh adapter is transparent: iteration 0 draws the same batch as sampling
    inst = small_generator("CVRP", 7, 1)(0)
    pol = Policy(PolicyParams.initial(5, 0.3))
    _, trace = eas(pol, inst, EasConfig(samples=8, max_iterations=1, seed=4))
    env, _ = sample_batch(pol, inst, 8, np.random.default_rng(4))
    assert trace.extra["iterations"][0]["best_sample_cost"] == -env.rewards().max()


def test_adaptation_csv(tmp_path):
    inst = small_generator("TSP", 8, 0)(0)
    _, trace = sgbs_eas(Policy(PolicyParams.initial(3)), inst, EasConfig(max_iterations=3))
    write_adaptation_csv(trace, tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == ",".join(ADAPT_COLUMNS)
    assert len(lines) == 4


def test_config_validation():
    for bad in ({"lr": -1}, {"samples": 1}, {"imitation": -0.1}, {"entropy": -1}, {"eas_steps_per_sgbs": 0}, {"optimizer": "rmsprop"}):
        with pytest.raises(ValueError):
            EasConfig(**bad)


def test_sgd_step_is_scaled_gradient():
    g = np.array([1.0, -2.0, 0.0])
    assert np.array_equal(Ascent("sgd", 0.5, 3).step(g), 0.5 * g)


def test_adam_first_step_is_signed_lr():
    # bias correction makes the first step lr * g / (|g| + eps)
    step = Ascent("adam", 0.1, 3).step(np.array([4.0, -1e-3, 0.0]))
    assert step == pytest.approx([0.1, -0.1, 0.0], rel=1e-4)


def test_adam_zero_gradient_stays_put():
    opt = Ascent("adam", 0.1, 4)
    for _ in range(5):
        assert not opt.step(np.zeros(4)).any()


def test_imitate_makes_incumbent_greedy():
    inst = small_generator("TSP", 7, 2)(0)
    pol = Policy(PolicyParams.initial(3, 0.5))
    target = Solution((3, 1, 5, 2, 6, 4), 0.0)
    ad = imitate(pol, inst, target, 200)
    assert ad.version == 200
    assert greedy_rollout(Policy(pol.params, ad), initial_state(inst)).actions == target.actions
