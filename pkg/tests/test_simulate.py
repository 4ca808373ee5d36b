import numpy as np
import pytest
from scipy import stats

from neuroloop.errors import ConfigurationError
from neuroloop.mwl import MwlCategory
from neuroloop.rl import (
    Action,
    Difficulty,
    Layout,
    N_ACTIONS,
    N_STATES,
    QTable,
    RewardWeights,
    State,
    StrategyKind,
    TrainingConfig,
    select_action,
    train,
)
from neuroloop.simulate import (
    AnswerModel,
    SimulatedUser,
    behavior_from_spec,
    expected_reward_table,
    generate_dataset,
    greedy_policy,
    no_adaptation_policy,
    optimal_action_sets,
    simulate,
)


@pytest.fixture(scope="module")
def user():
    return SimulatedUser(seed=1)


class TestUserModel:
    def test_default_table_rows_sum_to_one(self, user):
        for diff in Difficulty:
            for kind in StrategyKind:
                assert user.post_mwl_probs(diff, kind).sum() == pytest.approx(1.0)

    def test_invalid_distribution_rejected(self):
        bad = SimulatedUser.__new__
        response = SimulatedUser().response
        broken = dict(response)
        broken[(Difficulty.HIGH, StrategyKind.FULL)] = {
            MwlCategory.OPTIMAL: 0.9,
            MwlCategory.HIGH: 0.9,
            MwlCategory.LOW: 0.0,
        }
        with pytest.raises(ConfigurationError, match="sums to"):
            SimulatedUser(response=broken)

    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "user.yaml"
        path.write_text(
            """
response:
  high:
    none: {low: 0.1, optimal: 0.2, high: 0.7}
    partial: {low: 0.1, optimal: 0.5, high: 0.4}
    full: {low: 0.05, optimal: 0.8, high: 0.15}
  low:
    none: {low: 0.25, optimal: 0.6, high: 0.15}
    partial: {low: 0.2, optimal: 0.65, high: 0.15}
    full: {low: 0.35, optimal: 0.5, high: 0.15}
answers:
  low: {accuracy_prob: 0.75, rt_mean_ms: 6000, rt_sd_ms: 1200}
  optimal: {accuracy_prob: 0.9, rt_mean_ms: 4000, rt_sd_ms: 800}
  high: {accuracy_prob: 0.6, rt_mean_ms: 9000, rt_sd_ms: 2000}
seed: 3
"""
        )
        loaded = SimulatedUser.load(path)
        assert loaded.seed == 3
        assert loaded.post_mwl_probs(Difficulty.HIGH, StrategyKind.FULL)[1] == 0.8


class TestBehaviorSpec:
    def test_uniform(self):
        probs = behavior_from_spec("uniform")
        np.testing.assert_allclose(probs, np.full(7, 1 / 7))

    def test_zero_probability_rejected(self):
        spec = [0.5, 0.5, 0, 0, 0, 0, 0]
        with pytest.raises(ConfigurationError, match="coverage"):
            behavior_from_spec(spec)

    def test_must_sum_to_one(self):
        with pytest.raises(ConfigurationError, match="sums to"):
            behavior_from_spec([0.5] * 7)


class TestGenerateDataset:
    def test_records_carry_true_behavior_prob(self, user):
        records = generate_dataset(user, "uniform", 50, Layout.GRAPH, seed=4)
        assert len(records) == 50
        assert all(r.behavior_prob == pytest.approx(1 / 7) for r in records)
        assert all(r.layout is Layout.GRAPH for r in records)

    def test_deterministic(self, user):
        a = generate_dataset(user, "uniform", 100, Layout.TIMELINE, seed=9)
        b = generate_dataset(user, "uniform", 100, Layout.TIMELINE, seed=9)
        assert a == b

    def test_action_frequencies_match_policy_chi2(self, user):
        # Dataset faithfulness: per-state empirical action counts are
        # consistent with the behavior policy (chi-square, n=10,000).
        records = generate_dataset(user, "uniform", 10_000, Layout.GRAPH, seed=123)
        counts = np.zeros((N_STATES, N_ACTIONS))
        for r in records:
            counts[r.state.index, int(r.action)] += 1
        for s in range(N_STATES):
            total = counts[s].sum()
            if total < 35:  # need expected >= 5 per cell for the test to apply
                continue
            _, p_value = stats.chisquare(counts[s], f_exp=np.full(N_ACTIONS, total / 7))
            assert p_value > 1e-4, f"state {s}"


class TestExpectedRewardOracle:
    def test_degenerate_user_closed_form(self):
        # All-probability-one rows make expectations exact by hand.
        response = {}
        for diff in Difficulty:
            response[(diff, StrategyKind.NONE)] = {MwlCategory.HIGH: 1.0}
            response[(diff, StrategyKind.PARTIAL)] = {MwlCategory.OPTIMAL: 1.0}
            response[(diff, StrategyKind.FULL)] = {MwlCategory.LOW: 1.0}
        user = SimulatedUser(response=response)
        table = expected_reward_table(user)
        for s in range(N_STATES):
            assert table[s, int(Action.NO_ADAPTATION)] == 0.0
            assert table[s, int(Action.PARTIAL_COLOR)] == 1.0
            assert table[s, int(Action.FULL_ADAPTATION)] == 0.0

    def test_default_argmax_by_difficulty(self, user):
        table = expected_reward_table(user)
        sets = optimal_action_sets(table)
        for s in range(N_STATES):
            state = State.from_index(s)
            if state.difficulty is Difficulty.HIGH:
                assert sets[s] == {int(Action.FULL_ADAPTATION)}
            else:
                assert sets[s] == {int(a) for a in Action if a.strategy_kind is StrategyKind.PARTIAL}

    def test_accuracy_and_rt_terms(self):
        user = SimulatedUser()
        weights = RewardWeights(mwl=0.0, accuracy=1.0, reaction_time=0.0)
        table = expected_reward_table(user, weights)
        probs = user.post_mwl_probs(Difficulty.HIGH, StrategyKind.FULL)
        expected_acc = (
            probs[0] * user.answers[MwlCategory.LOW].accuracy_prob
            + probs[1] * user.answers[MwlCategory.OPTIMAL].accuracy_prob
            + probs[2] * user.answers[MwlCategory.HIGH].accuracy_prob
        )
        s = State(MwlCategory.LOW, Difficulty.HIGH, StrategyKind.NONE).index
        assert table[s, int(Action.FULL_ADAPTATION)] == pytest.approx(expected_acc)

    def test_rt_term_against_monte_carlo(self):
        user = SimulatedUser()
        weights = RewardWeights(mwl=0.0, accuracy=0.0, reaction_time=1.0, rt_cap_ms=8000.0)
        table = expected_reward_table(user, weights)
        rng = np.random.default_rng(5)
        probs = user.post_mwl_probs(Difficulty.LOW, StrategyKind.NONE)
        cats = [MwlCategory.LOW, MwlCategory.OPTIMAL, MwlCategory.HIGH]  # probs order
        draws = []
        for _ in range(200_000):
            cat = cats[rng.choice(3, p=probs)]
            m = user.answers[cat]
            draws.append(min(max(rng.normal(m.rt_mean_ms, m.rt_sd_ms), 1.0), 8000.0))
        mc = -np.mean(draws) / 8000.0
        s = State(MwlCategory.LOW, Difficulty.LOW, StrategyKind.NONE).index
        assert table[s, int(Action.NO_ADAPTATION)] == pytest.approx(mc, abs=0.005)


class TestSimulate:
    def test_deterministic_report(self, user):
        policies = {"baseline": no_adaptation_policy()}
        a = simulate(policies, user, n_episodes=500, seed=3)
        b = simulate(policies, user, n_episodes=500, seed=3)
        assert a == b

    def test_degenerate_user_exact_metrics(self):
        response = {}
        for diff in Difficulty:
            for kind in StrategyKind:
                response[(diff, kind)] = {MwlCategory.OPTIMAL: 1.0}
        answers = {
            cat: AnswerModel(accuracy_prob=1.0, rt_mean_ms=1000.0, rt_sd_ms=0.0)
            for cat in MwlCategory
        }
        user = SimulatedUser(response=response, answers=answers)
        report = simulate({"p": no_adaptation_policy()}, user, n_episodes=200, seed=0)
        metrics = report["p"]
        assert metrics.optimal_rate == 1.0
        assert metrics.mean_accuracy == 1.0
        assert metrics.mean_rt_ms == pytest.approx(1000.0)

    def test_trained_agent_beats_baseline(self, user):
        records = generate_dataset(user, "uniform", 4000, Layout.GRAPH, seed=21)
        table = train(records, Layout.GRAPH, TrainingConfig(target_mode="frozen_uniform"))
        report = simulate(
            {"trained": greedy_policy(table), "baseline": no_adaptation_policy()},
            user,
            n_episodes=4000,
            seed=2,
        )
        assert report["trained"].optimal_rate > report["baseline"].optimal_rate

    def test_trained_policy_expected_reward_near_argmax(self, user):
        # Per state, the greedy action's true expected reward sits within
        # 0.02 of the brute-force best; a 10k-episode run confirms it.
        records = generate_dataset(user, "uniform", 5000, Layout.GRAPH, seed=340)
        table = train(records, Layout.GRAPH, TrainingConfig(target_mode="frozen_uniform"))
        expected = expected_reward_table(user)
        chosen = []
        for s in range(N_STATES):
            action = select_action(table, State.from_index(s))
            chosen.append(action)
            assert expected[s].max() - expected[s, int(action)] <= 0.02
        exp_rate = np.mean([
            user.post_mwl_probs(State.from_index(s).difficulty, chosen[s].strategy_kind)[1]
            for s in range(N_STATES)
        ])
        report = simulate({"trained": greedy_policy(table)}, user, n_episodes=10_000, seed=11)
        assert abs(report["trained"].optimal_rate - exp_rate) <= 0.02
