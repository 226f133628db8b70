"""Built-in environments and the on-policy rollout collector.

Two tasks: a one-step quadratic-cost environment whose optimum is the zero
action regardless of state, and a 2-D point-mass with quadratic state cost.
Both are cheap enough to run hundreds of seeds on one core.
"""

from __future__ import annotations

import numpy as np

from .advantage import RolloutBatch, Trajectory

__all__ = [
    "QuadraticCostEnv",
    "PointMassEnv",
    "make_env",
    "collect_rollout",
    "expected_toy_cost",
    "toy_mean_action_cost",
]


class QuadraticCostEnv:
    """One-step episodes: state ~ Uniform[0,1], reward = -action^2.

    The state is fed to the policy network but the cost ignores it; the
    optimal policy is a deterministic zero action everywhere.
    """

    state_dim = 1
    action_dim = 1
    horizon = 1

    def __init__(self):
        self._state = None
        self._done = True

    def reset(self, rng: np.random.Generator):
        self._state = rng.uniform(0.0, 1.0, size=1)
        self._done = False
        return self._state.copy()

    def step(self, action, rng: np.random.Generator):
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        a = float(np.asarray(action).reshape(-1)[0])
        self._done = True
        return self._state.copy(), -a * a, True


class PointMassEnv:
    """2-D double integrator with quadratic position cost.

    State is (position, velocity) in R^4. Acceleration actions are clipped
    to [-1, 1]^2; dynamics per step: pos += dt*vel, then vel += dt*action.
    reward = -||pos||^2 - 0.01*||action||^2 on the updated position.
    Episodes end at the horizon. Constants are frozen; see config schema.
    """

    state_dim = 4
    action_dim = 2
    horizon = 64
    dt = 0.1
    action_cost = 0.01

    def __init__(self):
        self._pos = None
        self._vel = None
        self._t = 0
        self._done = True

    def reset(self, rng: np.random.Generator):
        self._pos = rng.uniform(-1.0, 1.0, size=2)
        self._vel = np.zeros(2)
        self._t = 0
        self._done = False
        return np.concatenate([self._pos, self._vel])

    def step(self, action, rng: np.random.Generator):
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
        self._pos = self._pos + self.dt * self._vel
        self._vel = self._vel + self.dt * a
        self._t += 1
        reward = -float(np.sum(self._pos**2)) - self.action_cost * float(np.sum(a * a))
        if self._t >= self.horizon:
            self._done = True
        return np.concatenate([self._pos, self._vel]), reward, self._done


_ENVS = {"quadratic": QuadraticCostEnv, "pointmass": PointMassEnv}


def make_env(name: str):
    try:
        return _ENVS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(_ENVS)}") from None


def collect_rollout(env, policy, steps: int, rng: np.random.Generator) -> RolloutBatch:
    """Gather exactly `steps` on-policy transitions.

    Episodes run to completion except possibly the last, which is cut at the
    batch limit and marked non-terminal so return/advantage estimation can
    bootstrap it. Each transition stores the action, the unit noise that
    produced it, and the policy's (mean, std) at that state.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    trajectories = []
    collected = 0
    while collected < steps:
        state = env.reset(rng)
        states, actions, noises, rewards, means, stds = [], [], [], [], [], []
        terminal = False
        while True:
            action, noise, mean, std = policy.act(state, rng)
            next_state, reward, done = env.step(action, rng)
            states.append(state)
            actions.append(action)
            noises.append(noise)
            rewards.append(reward)
            means.append(mean)
            stds.append(std)
            collected += 1
            state = next_state
            if done:
                terminal = True
                break
            if collected >= steps:
                break
        trajectories.append(
            Trajectory(
                states=np.asarray(states),
                actions=np.asarray(actions),
                noises=np.asarray(noises),
                rewards=np.asarray(rewards, dtype=np.float64),
                old_mean=np.asarray(means),
                old_std=np.asarray(stds),
                final_state=np.asarray(state, dtype=np.float64),
                terminal=terminal,
            )
        )
    return RolloutBatch.from_trajectories(trajectories)


def expected_toy_cost(mu: float, sigma: float) -> float:
    """E[a^2] for a ~ N(mu, sigma^2): the analytic one-step toy cost."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return float(mu * mu + sigma * sigma)


def toy_mean_action_cost(policy, n_grid: int = 64) -> float:
    """Cost of executing the distribution mean on the toy task.

    Deterministic evaluation: mean of mu(s)^2 over an evenly spaced state
    grid in [0, 1].
    """
    states = np.linspace(0.0, 1.0, n_grid)[:, None]
    mu, _, _, _ = policy.distribution(states)
    return float(np.mean(mu[:, 0] ** 2))
