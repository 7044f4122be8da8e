import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from adaptlep import environments as envs
from adaptlep.errors import ConfigError, DomainError
from adaptlep.estimators import best_arm, quadratic_variation


def test_fixed_variation_zero_target_is_constant():
    env = envs.gen_fixed_variation(100, 3, 0.0, [0.2, 0.5, 0.8])
    assert env.realized_q == 0.0
    assert np.all(env.losses == [0.2, 0.5, 0.8])


@pytest.mark.parametrize("T,K", [(1000, 2), (4000, 5)])
def test_fixed_variation_hits_maximal_target(T, K):
    target = T * K / 4
    env = envs.gen_fixed_variation(T, K, target, np.full(K, 0.5), seed=3)
    assert 0.8 * target <= quadratic_variation(env.losses) <= 1.2 * target
    assert env.params["realized_q"] == pytest.approx(env.realized_q)


@pytest.mark.parametrize("target", [5.0, 200.0, 2500.0])
def test_fixed_variation_calibration_with_clipping(target):
    env = envs.gen_fixed_variation(10_000, 2, target, [0.05, 0.6], seed=1)
    assert 0.8 * target <= env.realized_q <= 1.2 * target


def test_fixed_variation_unique_minimiser_is_best_arm():
    for seed in range(20):
        env = envs.gen_fixed_variation(10_000, 3, 10_000 * 3 * 0.05, [0.5, 0.3, 0.6], seed=seed)
        assert best_arm(env.losses) == 1


def test_fixed_variation_infeasible():
    with pytest.raises(ConfigError):
        envs.gen_fixed_variation(100, 2, 100 * 2 / 4 + 1, None)
    with pytest.raises(ConfigError):
        # one coordinate carries at most T/4 of variation
        envs.gen_fixed_variation(1000, 2, 500.0, [0.5, 0.5], profile=[1.0, 0.0])


def test_fixed_variation_profile():
    T = 8192
    env = envs.gen_fixed_variation(T, 3, 300.0, [0.25, 0.75, 0.75], seed=2, profile=[100, 100, 100])
    assert env.realized_qstar == pytest.approx(100, rel=0.2)


def test_bernoulli_gap_means():
    T, gap = 10_000, 0.1
    env = envs.gen_bernoulli_gap(T, 3, 0.25, gap, best_arm=1, seed=4)
    p = np.array([0.35, 0.25, 0.35])
    se = np.sqrt(p * (1 - p) / T)
    assert np.all(np.abs(env.losses.mean(axis=0) - p) <= 3 * se)


def test_bernoulli_gap_chi_square():
    env = envs.gen_bernoulli_gap(100_000, 2, 0.25, 0.2, seed=5)
    for col, p in zip(env.losses.T, (0.25, 0.45)):
        ones = col.sum()
        assert stats.chisquare([ones, col.size - ones], [p * col.size, (1 - p) * col.size]).pvalue > 1e-3


def test_bernoulli_gap_zero_gap_regret_nonnegative_on_average():
    from adaptlep.learners import LearnerConfig, run_le_prediction
    regrets = []
    for seed in range(20):
        env = envs.gen_bernoulli_gap(2000, 2, 0.25, 0.0, seed=seed)
        regrets.append(run_le_prediction(LearnerConfig("le_full", 2000, 1000, "cap", seed=seed), env).regret)
    assert np.mean(regrets) >= 0


def test_bernoulli_gap_ball_membership():
    a = 0.25
    hits = sum(envs.variation_ball_check(envs.gen_bernoulli_gap(2000, 2, a, 0.0, seed=s).losses, a * (1 - a) * 1.2)
               for s in range(100))
    assert hits >= 95


def test_dyadic_degenerate():
    env = envs.gen_dyadic(500, 4, 0.0, 0.0, seed=1)
    assert np.all(env.losses == 0)


def test_dyadic_marginals_and_independence():
    T, K = 100_000, 4
    env = envs.gen_dyadic(T, K, 0.25, 0.2, best_arm=2, seed=6)
    p = np.where(np.arange(K) == 2, 0.25, 0.45)
    for col, pi in zip(env.losses.T, p):
        ones = col.sum()
        assert stats.chisquare([ones, T - ones], [pi * T, (1 - pi) * T]).pvalue > 1e-3
    corr = np.corrcoef(env.losses.T)
    assert np.abs(corr[np.triu_indices(K, 1)]).max() <= 0.02


def test_dyadic_too_many_arms():
    with pytest.raises(ConfigError):
        envs.gen_dyadic(10, 51, 0.2, 0.1)


def test_variation_ball_examples():
    const = np.tile([0.3, 0.4], (10, 1))
    assert envs.variation_ball_check(const, 0.0)
    alt = np.array([[0, 1], [1, 0], [0, 1], [1, 0]], float)
    assert envs.variation_ball_check(alt, 0.25)
    assert not envs.variation_ball_check(alt, 0.2499)
    assert not envs.variation_ball_check(alt, 0.0)
    with pytest.raises(DomainError):
        envs.variation_ball_check(alt, 0.3)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 0.25), st.floats(0, 0.25))
def test_variation_ball_monotone(seed, a1, a2):
    losses = np.random.default_rng(seed).random((20, 3))
    lo, hi = sorted((a1, a2))
    if envs.variation_ball_check(losses, lo):
        assert envs.variation_ball_check(losses, hi)


def test_emission_is_deterministic_and_in_range():
    for make in (lambda: envs.gen_fixed_variation(500, 3, 50, None, seed=9),
                 lambda: envs.gen_bernoulli_gap(500, 3, 0.3, 0.1, seed=9),
                 lambda: envs.gen_dyadic(500, 3, 0.3, 0.1, seed=9)):
        a, b = make(), make()
        assert np.array_equal(a.losses, b.losses)
        assert a.losses.min() >= 0 and a.losses.max() <= 1
        assert np.array_equal(a.loss(17), b.losses[17])


def test_losses_are_read_only():
    env = envs.gen_alternating(4)
    with pytest.raises(ValueError):
        env.losses[0, 0] = 0.5


def test_environment_rejects_out_of_range():
    with pytest.raises(ConfigError):
        envs.Environment("bad", np.array([[1.5, 0.0]]))


# --- games -----------------------------------------------------------------


def test_solve_w_identity_and_scaling():
    H = np.array([[0.2, 0.5, 0.1], [0.9, 0.3, 0.4], [0.6, 0.8, 0.7]])
    sol = envs.solve_w(H, H)
    assert sol.feasible and sol.residual <= 1e-12
    sol = envs.solve_w(0.5 * H, H)
    assert sol.feasible
    np.testing.assert_allclose(sol.W, 0.5 * np.eye(3), atol=1e-10)


def test_solve_w_recovers_constructed_game(rng):
    W0 = rng.uniform(-1, 1, (3, 3))
    H = rng.random((3, 4))
    sol = envs.solve_w(W0 @ H, H)
    assert sol.residual <= 1e-10
    np.testing.assert_allclose(sol.W @ H, W0 @ H, atol=1e-10)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(2, 6))
def test_solve_w_round_trip(seed, K, N):
    rng = np.random.default_rng(seed)
    W0 = rng.uniform(-5, 5, (K, K))
    H = rng.random((K, N))
    assert envs.solve_w(W0 @ H, H).residual <= 1e-8


def test_solve_w_infeasible_report():
    L = np.array([[0.0, 1.0], [1.0, 0.0]])
    H = np.zeros((2, 2))
    sol = envs.solve_w(L, H)
    assert not sol.feasible
    assert "infeasible" in sol.report()


def test_detect_revealing_examples():
    H = np.array([[1, 1, 1], [0.1, 0.2, 0.3], [2, 2, 2]])
    L = np.array([[0.1, 0.2, 0.3], [0.4, 0.9, 0.5], [0.0, 0.0, 0.0]])
    assert envs.detect_revealing_action(H, L) == (1, 0.9)
    assert envs.detect_revealing_action(np.ones((3, 3))) is None
    two = np.array([[0, 0], [1, 2], [3, 4]])
    assert envs.detect_revealing_action(two)[0] == 1


def test_bundled_games():
    spam = envs.bundled_game("spam")
    assert spam.revealing_row == 0 and spam.revealing_cost == 0.5
    assert spam.W is None
    hard = envs.bundled_game("hard4")
    assert hard.W is not None and hard.revealing_row is None
    assert np.abs(hard.W @ hard.H - hard.L).max() <= 1e-8
    assert "feasible" in hard.describe()


def test_game_round_trip_and_parse_errors(tmp_path):
    game = envs.bundled_game("hard4")
    again = envs.parse_game(envs.format_game(game))
    np.testing.assert_array_equal(again.L, game.L)
    np.testing.assert_array_equal(again.H, game.H)
    path = tmp_path / "g.txt"
    path.write_text(envs.format_game(game))
    assert envs.load_game(path).num_actions == 4
    for bad in ("", "2\n", "2 2\n0 1\n1 0\n0 0\n1 1\n", "2 2\n0 1\n1 0\n\n0 0\n", "1 2\n0 1 1\n\n0 1\n"):
        with pytest.raises(ConfigError):
            envs.parse_game(bad)
    with pytest.raises(ConfigError):
        envs.GameSpec(np.array([[2.0, 0.0]]), np.array([[0.0, 1.0]]))


def test_pm_environment():
    game = envs.bundled_game("hard4")
    env = envs.gen_columns(game, 1000, [0.4, 0.2, 0.2, 0.2], seed=1)
    assert env.losses.shape == (1000, 4)
    np.testing.assert_array_equal(env.losses[5], game.L[:, env.columns[5]])
    assert env.feedback(2, 5) == game.H[2, env.columns[5]]
    assert np.array_equal(env.columns, envs.gen_columns(game, 1000, [0.4, 0.2, 0.2, 0.2], seed=1).columns)
    const = envs.gen_constant_column(game, 50, 3)
    assert const.realized_q == 0.0
    with pytest.raises(ConfigError):
        envs.gen_columns(game, 10, [0.5, 0.5])
