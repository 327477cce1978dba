import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adcdyn.game import (GameClass, GameSpec, GameStructureError, ParameterError, RewardNoise,
                         StochasticGame, build_effective_game, expected_reward,
                         exploration_kernel, generate_random_game, load_game, save_game,
                         validate_game)

from conftest import make_game

STANDARD_ZS = GameSpec(2, 3, (3, 3), 0.8, GameClass.ZERO_SUM, (0.0, 1.0))


def uniform_game(n_states=2, counts=(2, 2)):
    J = int(np.prod(counts))
    r = np.zeros((len(counts), n_states, J))
    p = np.full((n_states, J, n_states), 1.0 / n_states)
    return StochasticGame(len(counts), n_states, counts, r, p, 0.8)


class TestValidation:
    def test_uniform_kernel_passes(self):
        assert validate_game(uniform_game()).passed

    def test_zero_transition_is_reachability_violation(self):
        g = uniform_game()
        p = g.transitions.copy()
        p[1, 2] = [1.0, 0.0]
        bad = StochasticGame(2, 2, (2, 2), g.rewards, p, 0.8)
        rep = validate_game(bad)
        assert not rep.passed
        assert [(v.rule, v.location, v.magnitude) for v in rep.violations] == [
            ("reachability", (1, 2, 1), 0.0)
        ]

    def test_zero_sum_violation_reports_cell_and_magnitude(self):
        r = np.zeros((2, 2, 4))
        r[0, 1, 3] = 0.5
        g = uniform_game()
        bad = StochasticGame(2, 2, (2, 2), r, g.transitions, 0.8, GameClass.ZERO_SUM)
        rep = validate_game(bad)
        assert [(v.rule, v.location, v.magnitude) for v in rep.violations] == [
            ("zero-sum", (1, 3), 0.5)
        ]

    def test_identical_interest_violation(self):
        r = np.zeros((3, 1, 8))
        r[2, 0, 5] = 0.1
        p = np.ones((1, 8, 1))
        rep = validate_game(StochasticGame(3, 1, (2, 2, 2), r, p, 0.5,
                                           GameClass.IDENTICAL_INTEREST))
        assert rep.rules() == {"identical-interest"}

    def test_row_sum_violation(self):
        p = np.full((2, 4, 2), 0.5)
        p[0, 0] = [0.6, 0.6]
        rep = validate_game(StochasticGame(2, 2, (2, 2), np.zeros((2, 2, 4)), p, 0.8))
        assert "simplex" in rep.rules()

    def test_validation_does_not_mutate(self):
        g = uniform_game()
        before = g.transitions.copy()
        validate_game(g)
        assert np.array_equal(before, g.transitions)

    @pytest.mark.parametrize("shape", [(2, 2, 3), (1, 2, 4)])
    def test_dimension_mismatch_is_structural_error(self, shape):
        with pytest.raises(GameStructureError):
            StochasticGame(2, 2, (2, 2), np.zeros(shape), np.full((2, 4, 2), 0.5), 0.8)

    def test_gamma_out_of_range(self):
        with pytest.raises(ParameterError):
            StochasticGame(1, 1, (1,), np.zeros((1, 1, 1)), np.ones((1, 1, 1)), 1.0)


class TestJointIndex:
    def test_agent0_fastest(self):
        g = uniform_game(1, (2, 3, 2))
        assert g.encode((1, 0, 0)) == 1
        assert g.encode((0, 1, 0)) == 2
        assert g.encode((0, 0, 1)) == 6
        assert g.encode((1, 2, 1)) == 1 + 2 * 2 + 6

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=4))
    def test_bijection(self, counts):
        g = uniform_game(1, tuple(counts))
        seen = set()
        for acts in itertools.product(*[range(c) for c in counts]):
            j = g.encode(acts)
            assert g.decode(j) == acts
            seen.add(j)
        assert seen == set(range(g.n_joint))
        for j in range(g.n_joint):
            assert g.encode(g.decode(j)) == j
        assert np.array_equal(g.action_table(), [g.decode(j) for j in range(g.n_joint)])


class TestGenerator:
    def test_deterministic(self):
        a = generate_random_game(STANDARD_ZS, 7)
        b = generate_random_game(STANDARD_ZS, 7)
        assert np.array_equal(a.rewards, b.rewards)
        assert np.array_equal(a.transitions, b.transitions)
        c = generate_random_game(STANDARD_ZS, 8)
        assert not np.array_equal(a.rewards, c.rewards)

    def test_standard_zero_sum_shape(self):
        g = generate_random_game(STANDARD_ZS, 0)
        assert validate_game(g).passed
        assert g.n_joint == 9
        assert np.array_equal(g.rewards[1], -g.rewards[0])
        assert g.rewards[0].min() >= 0.0 and g.rewards[0].max() <= 1.0

    def test_identical_interest_copies(self):
        spec = GameSpec(3, 3, (3, 3, 3), 0.8, GameClass.IDENTICAL_INTEREST)
        g = generate_random_game(spec, 1)
        assert validate_game(g).passed
        assert np.array_equal(g.rewards[0], g.rewards[2])

    @pytest.mark.parametrize("floor", [None, 0.05, 0.2])
    def test_transition_floor_over_100_games(self, floor):
        spec = GameSpec(2, 3, (3, 2), 0.8, GameClass.GENERAL, (0.0, 1.0), floor)
        mins = [generate_random_game(spec, s).transitions.min() for s in range(100)]
        assert min(mins) >= spec.floor
        if floor is None:
            # raw draws on [0.1, 1]: the normalized floor is 0.1 / (0.1 + 2)
            assert spec.floor == pytest.approx(0.1 / 2.1)

    def test_bad_floor(self):
        with pytest.raises(ParameterError):
            GameSpec(2, 3, (3, 3), 0.8, transition_floor=0.5)

    def test_validates_for_many_seeds(self):
        for cls, n in [(GameClass.ZERO_SUM, 2), (GameClass.IDENTICAL_INTEREST, 3),
                       (GameClass.GENERAL, 2)]:
            spec = GameSpec(n, 3, (3,) * n, 0.8, cls)
            for seed in range(20):
                assert validate_game(generate_random_game(spec, seed)).passed


class TestExpectedReward:
    def test_noiseless_entry(self):
        g = generate_random_game(STANDARD_ZS, 2)
        assert expected_reward(g, 0, 1, 4) == g.rewards[0, 1, 4]
        assert expected_reward(g, 0, 1, (1, 1)) == g.rewards[0, 1, 4]

    def test_zero_mean_noise(self):
        r = np.full((1, 1, 1), 0.4)
        noise = (RewardNoise(np.array([-0.1, 0.1]), np.array([0.5, 0.5])),)
        g = StochasticGame(1, 1, (1,), r, np.ones((1, 1, 1)), 0.5, noise=noise)
        assert expected_reward(g, 0, 0, 0) == 0.4

    def test_nonzero_mean_noise_rejected(self):
        with pytest.raises(ParameterError):
            RewardNoise(np.array([0.0, 0.1]), np.array([0.5, 0.5]))

    def test_zero_sum_negation(self):
        g = generate_random_game(STANDARD_ZS, 3)
        for s in range(3):
            for j in range(9):
                assert expected_reward(g, 1, s, j) == -expected_reward(g, 0, s, j)

    def test_out_of_range(self):
        g = generate_random_game(STANDARD_ZS, 3)
        with pytest.raises(IndexError):
            expected_reward(g, 2, 0, 0)
        with pytest.raises(IndexError):
            expected_reward(g, 0, 0, 9)


class TestExplorationKernel:
    def test_standard_epsilon(self):
        d = exploration_kernel(0.002, 3, 1)
        assert d == pytest.approx([0.002 / 3, 1 - 0.002 + 0.002 / 3, 0.002 / 3], abs=1e-15)
        assert d.sum() == 1.0

    def test_single_action(self):
        assert exploration_kernel(0.3, 1, 0).tolist() == [1.0]

    def test_half(self):
        assert exploration_kernel(0.5, 2, 0).tolist() == [0.75, 0.25]

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ParameterError):
            exploration_kernel(eps, 3, 0)


class TestEffectiveGame:
    def test_preserves_structure(self):
        g = generate_random_game(STANDARD_ZS, 4)
        e = build_effective_game(g, 0.002)
        assert (e.gamma, e.n_states, e.action_counts) == (g.gamma, g.n_states, g.action_counts)
        assert validate_game(e).passed

    def test_one_state_two_by_two_hand_enumeration(self):
        r = np.array([[[1.0, 2.0, 3.0, 4.0]], [[0.0, 0.0, 0.0, 0.0]]])
        g = StochasticGame(2, 1, (2, 2), r, np.ones((1, 4, 1)), 0.9)
        e = build_effective_game(g, 0.5)
        # intended (0, 1) -> flat 2; each agent keeps its action w.p. 0.75
        stay, flip = 0.75, 0.25
        expected = (stay * stay * r[0, 0, 2]      # (0, 1)
                    + flip * stay * r[0, 0, 3]    # (1, 1)
                    + stay * flip * r[0, 0, 0]    # (0, 0)
                    + flip * flip * r[0, 0, 1])   # (1, 0)
        assert expected == 2.75
        assert e.rewards[0, 0, 2] == pytest.approx(expected, abs=1e-15)

    def test_zero_sum_preserved(self):
        g = generate_random_game(STANDARD_ZS, 5)
        assert validate_game(build_effective_game(g, 0.3)).passed

    @given(st.integers(0, 10**6), st.floats(0.01, 0.99), st.floats(-3, 3))
    def test_linear_in_reward_shift(self, seed, eps, c):
        g = make_game(np.random.default_rng(seed), 2, 2, (2, 3))
        a = build_effective_game(g, eps).rewards
        b = build_effective_game(g.with_rewards(g.rewards + c), eps).rewards
        assert np.max(np.abs(b - (a + c))) <= 1e-12

    @given(st.integers(0, 10**6), st.floats(0.01, 0.99))
    def test_rows_and_floor(self, seed, eps):
        g = make_game(np.random.default_rng(seed), 3, 2, 2)
        e = build_effective_game(g, eps)
        assert np.max(np.abs(e.transitions.sum(axis=2) - 1)) <= 1e-12
        assert e.transitions.min() >= g.transitions.min() - 1e-15

    def test_bad_epsilon(self):
        with pytest.raises(ParameterError):
            build_effective_game(generate_random_game(STANDARD_ZS, 0), 1.0)


def test_json_round_trip(tmp_path):
    g = generate_random_game(STANDARD_ZS, 9)
    path = tmp_path / "g.json"
    save_game(g, path)
    d = json.loads(path.read_text())
    assert d["joint_index"] == "agent0_fastest"
    assert set(d) >= {"n_agents", "n_states", "action_counts", "gamma", "game_class",
                      "rewards", "transitions"}
    h = load_game(path)
    assert np.array_equal(g.rewards, h.rewards) and np.array_equal(g.transitions, h.transitions)
    assert h.game_class is GameClass.ZERO_SUM


def test_json_rejects_other_convention():
    d = generate_random_game(STANDARD_ZS, 9).to_dict()
    d["joint_index"] = "agent0_slowest"
    with pytest.raises(GameStructureError):
        StochasticGame.from_dict(d)
