import numpy as np
import pytest

from tdlab.envs import (
    PointMassEnv,
    QuadraticCostEnv,
    collect_rollout,
    expected_toy_cost,
    make_env,
    toy_mean_action_cost,
)
from tdlab.nets import make_policy


class _StubPolicy:
    """Fixed state-independent Gaussian, for collector tests."""

    def __init__(self, mu, sigma):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        self.sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
        self.action_dim = self.mu.shape[0]

    def act(self, state, rng):
        y = rng.standard_normal(self.action_dim)
        return self.mu + y * self.sigma, y, self.mu.copy(), self.sigma.copy()


def test_make_env_names():
    assert isinstance(make_env("quadratic"), QuadraticCostEnv)
    assert isinstance(make_env("pointmass"), PointMassEnv)
    with pytest.raises(ValueError):
        make_env("mujoco")


def test_quadratic_one_step_episodes():
    batch = collect_rollout(QuadraticCostEnv(), _StubPolicy([0.5], [0.1]), 5, np.random.default_rng(0))
    assert len(batch.trajectories) == 5
    assert all(len(t) == 1 and t.terminal for t in batch.trajectories)
    assert np.all(batch.states >= 0.0) and np.all(batch.states <= 1.0)


def test_quadratic_near_deterministic_zero_policy():
    batch = collect_rollout(QuadraticCostEnv(), _StubPolicy([0.0], [1e-12]), 20, np.random.default_rng(1))
    assert np.all(np.abs(batch.rewards) < 1e-20)


def test_quadratic_reward_matches_action():
    rng = np.random.default_rng(2)
    batch = collect_rollout(QuadraticCostEnv(), _StubPolicy([0.3], [0.5]), 50, rng)
    np.testing.assert_allclose(batch.rewards, -batch.actions[:, 0] ** 2, rtol=1e-15)


def test_quadratic_empirical_mean_cost():
    # mean reward ~ -(mu^2 + sigma^2) within 3 standard errors at 1e5 steps
    mu, sigma, n = 0.4, 0.7, 100_000
    batch = collect_rollout(QuadraticCostEnv(), _StubPolicy([mu], [sigma]), n, np.random.default_rng(3))
    est = float(np.mean(batch.rewards))
    se = float(np.std(batch.rewards, ddof=1) / np.sqrt(n))
    assert abs(est + expected_toy_cost(mu, sigma)) < 3 * se


def test_pointmass_episode_split():
    # 130 steps, horizon 64: two terminal episodes plus a truncated one of length 2
    batch = collect_rollout(PointMassEnv(), _StubPolicy([0.0, 0.0], [0.1, 0.1]), 130, np.random.default_rng(4))
    lengths = [len(t) for t in batch.trajectories]
    terminals = [t.terminal for t in batch.trajectories]
    assert lengths == [64, 64, 2]
    assert terminals == [True, True, False]


def test_pointmass_zero_action_conserves_velocity():
    env = PointMassEnv()
    rng = np.random.default_rng(5)
    state = env.reset(rng)
    v0 = state[2:].copy()
    for _ in range(10):
        state, _, done = env.step(np.zeros(2), rng)
        np.testing.assert_array_equal(state[2:], v0)
    assert not done


def test_pointmass_dynamics_one_step():
    env = PointMassEnv()
    rng = np.random.default_rng(6)
    s0 = env.reset(rng)
    pos0 = s0[:2].copy()
    s1, reward, _ = env.step(np.array([2.0, -2.0]), rng)  # clipped to [1, -1]
    np.testing.assert_allclose(s1[:2], pos0, rtol=1e-15)  # vel was 0 when pos updated
    np.testing.assert_allclose(s1[2:], [0.1, -0.1], rtol=1e-15)
    assert reward == pytest.approx(-(float(np.sum(pos0**2)) + 0.01 * 2.0), rel=1e-12)


def test_step_after_done_raises():
    env = QuadraticCostEnv()
    rng = np.random.default_rng(7)
    env.reset(rng)
    env.step([0.1], rng)
    with pytest.raises(RuntimeError):
        env.step([0.1], rng)
    env.reset(rng)
    env.step([0.1], rng)  # fine again after reset


def test_collect_rollout_reproducible():
    def run():
        return collect_rollout(PointMassEnv(), _StubPolicy([0.0, 0.0], [0.3, 0.3]), 70, np.random.default_rng(42))

    a, b = run(), run()
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.rewards, b.rewards)


def test_expected_toy_cost_values():
    assert expected_toy_cost(0.0, 0.0) == 0.0
    assert expected_toy_cost(0.0, 1.0) == 1.0
    assert expected_toy_cost(2.0, 0.0) == 4.0
    with pytest.raises(ValueError):
        expected_toy_cost(0.0, -1.0)


def test_toy_mean_action_cost_of_real_policy():
    rng = np.random.default_rng(8)
    pol = make_policy(rng, state_dim=1, action_dim=1, hidden=[10], sigma0=0.3, final_scale=0.0)
    assert toy_mean_action_cost(pol) == 0.0  # zero final layer -> mu identically 0
