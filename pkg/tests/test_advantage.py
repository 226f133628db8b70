import numpy as np
import pytest

from tdlab.advantage import RolloutBatch, Trajectory, attach_estimates, gae, mc_returns


def _traj(rewards, terminal=True, state_dim=1, action_dim=1):
    n = len(rewards)
    return Trajectory(
        states=np.zeros((n, state_dim)),
        actions=np.zeros((n, action_dim)),
        noises=np.zeros((n, action_dim)),
        rewards=np.asarray(rewards, dtype=np.float64),
        old_mean=np.zeros((n, action_dim)),
        old_std=np.ones((n, action_dim)),
        final_state=np.zeros(state_dim),
        terminal=terminal,
    )


def test_mc_returns_no_discount_horizon():
    np.testing.assert_array_equal(mc_returns([1.0, 1.0, 1.0], gamma=0.0), [1, 1, 1])


def test_mc_returns_geometric():
    np.testing.assert_allclose(mc_returns([0.0, 0.0, 1.0], gamma=0.5), [0.25, 0.5, 1.0])


def test_mc_returns_single():
    np.testing.assert_array_equal(mc_returns([3.5], gamma=0.9), [3.5])


def test_mc_returns_bootstrap():
    # truncated tail: R = r + gamma * V(next)
    np.testing.assert_allclose(mc_returns([1.0], gamma=0.5, bootstrap=2.0), [2.0])
    np.testing.assert_allclose(
        mc_returns([1.0, 1.0], gamma=0.5, bootstrap=4.0), [1.0 + 0.5 * 3.0, 3.0]
    )


def test_gae_lambda_zero_is_td_residual():
    rewards = np.array([1.0, 2.0, 3.0])
    values = np.array([0.5, 1.0, -1.0, 2.0])
    adv = gae(rewards, values, gamma=0.9, lam=0.0)
    expected = rewards + 0.9 * values[1:] - values[:-1]
    np.testing.assert_allclose(adv, expected, rtol=1e-15)


def test_gae_lambda_one_zero_critic_is_mc():
    rng = np.random.default_rng(2)
    rewards = rng.normal(size=7)
    values = np.zeros(8)
    adv = gae(rewards, values, gamma=0.95, lam=1.0)
    np.testing.assert_allclose(adv, mc_returns(rewards, gamma=0.95), rtol=1e-14)


def test_gae_hand_recursion():
    # delta = [1, 0.5], A = [1.5, 0.5]
    adv = gae([1.0, 1.0], [0.5, 0.5, 0.0], gamma=1.0, lam=1.0)
    np.testing.assert_allclose(adv, [1.5, 0.5], rtol=0, atol=0)


def test_gae_linear_in_rewards():
    rng = np.random.default_rng(5)
    rewards = rng.normal(size=9)
    values = rng.normal(size=10)
    base = gae(rewards, values, gamma=0.99, lam=0.9)
    scaled = gae(3.0 * rewards, 3.0 * values, gamma=0.99, lam=0.9)
    np.testing.assert_allclose(scaled, 3.0 * base, rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_gae_matches_brute_force_double_sum(n):
    # A_t = sum_{l>=0} (gamma*lam)^l * delta_{t+l}, direct evaluation
    rng = np.random.default_rng(100 + n)
    rewards = rng.normal(size=n)
    values = rng.normal(size=n + 1)
    gamma, lam = 0.97, 0.9
    fast = gae(rewards, values, gamma, lam)
    delta = rewards + gamma * values[1:] - values[:-1]
    brute = np.array(
        [sum((gamma * lam) ** l * delta[t + l] for l in range(n - t)) for t in range(n)]
    )
    np.testing.assert_allclose(fast, brute, rtol=0, atol=1e-10)


def test_gae_length_mismatch_raises():
    with pytest.raises(ValueError):
        gae([1.0, 2.0], [0.0, 0.0], gamma=0.9, lam=0.9)


def test_batch_flattening_and_slices():
    t1 = _traj([1.0, 2.0])
    t2 = _traj([3.0], terminal=False)
    batch = RolloutBatch.from_trajectories([t1, t2])
    assert batch.total_steps == 3
    assert batch.slices == [slice(0, 2), slice(2, 3)]
    np.testing.assert_array_equal(batch.rewards, [1.0, 2.0, 3.0])
    # truncated episodes are excluded from the episode-return report
    assert batch.episode_returns == [3.0]


def test_attach_estimates_bootstraps_only_truncated():
    term = _traj([1.0], terminal=True)
    trunc = _traj([1.0], terminal=False)
    batch = RolloutBatch.from_trajectories([term, trunc])

    def critic(states):
        return np.full((states.shape[0], 1), 2.0)

    attach_estimates(batch, critic, gamma=0.5, lam=1.0)
    # terminal: R = 1; truncated: R = 1 + 0.5*2 = 2
    np.testing.assert_allclose(batch.returns, [1.0, 2.0])
    # terminal: delta = 1 + 0 - 2 = -1; truncated: delta = 1 + 0.5*2 - 2 = 0
    np.testing.assert_allclose(batch.advantages, [-1.0, 0.0])
