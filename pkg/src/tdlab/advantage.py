"""Monte Carlo returns and generalized advantage estimation.

Trajectories carry the old-policy statistics captured at collection time so
target construction can reuse the exact sampling distribution. Truncated
(non-terminal) tails bootstrap with the critic value of the state after the
last transition; terminal tails do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Trajectory",
    "RolloutBatch",
    "mc_returns",
    "gae",
    "attach_estimates",
]


@dataclass
class Trajectory:
    """One episode (or truncated episode fragment) of on-policy experience."""

    states: np.ndarray      # (T, state_dim)
    actions: np.ndarray     # (T, action_dim)
    noises: np.ndarray      # (T, action_dim) unit noise y_t with a_t = mu + y_t*std
    rewards: np.ndarray     # (T,)
    old_mean: np.ndarray    # (T, action_dim) policy mean at collection time
    old_std: np.ndarray     # (T, action_dim) policy std at collection time
    final_state: np.ndarray  # state after the last transition (bootstrap point)
    terminal: bool          # True: episode ended; False: cut by the batch limit

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass
class RolloutBatch:
    """A batch of trajectories plus flattened per-transition views.

    returns/advantages are filled by attach_estimates; slices[i] addresses
    trajectory i's rows in the flattened arrays.
    """

    trajectories: list
    states: np.ndarray
    actions: np.ndarray
    noises: np.ndarray
    rewards: np.ndarray
    old_mean: np.ndarray
    old_std: np.ndarray
    slices: list
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None
    episode_returns: list = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return self.states.shape[0]

    @classmethod
    def from_trajectories(cls, trajectories) -> "RolloutBatch":
        slices = []
        start = 0
        for traj in trajectories:
            stop = start + len(traj)
            slices.append(slice(start, stop))
            start = stop
        return cls(
            trajectories=list(trajectories),
            states=np.concatenate([t.states for t in trajectories]),
            actions=np.concatenate([t.actions for t in trajectories]),
            noises=np.concatenate([t.noises for t in trajectories]),
            rewards=np.concatenate([t.rewards for t in trajectories]),
            old_mean=np.concatenate([t.old_mean for t in trajectories]),
            old_std=np.concatenate([t.old_std for t in trajectories]),
            slices=slices,
            episode_returns=[float(np.sum(t.rewards)) for t in trajectories if t.terminal],
        )


def mc_returns(rewards, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    """Discounted reward-to-go, R_t = r_t + gamma * R_{t+1}.

    bootstrap seeds the recursion past the last reward: 0 for terminal
    episodes, the critic's value of the next state for truncated ones.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = float(bootstrap)
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimation by backward recursion.

    values has one entry per state plus a bootstrap entry for the state
    after the last transition (0 if terminal):
        delta_t = r_t + gamma*V(s_{t+1}) - V(s_t)
        A_t = delta_t + gamma*lam*A_{t+1}
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError("values must have len(rewards) + 1 entries (bootstrap included)")
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        acc = delta + gamma * lam * acc
        out[t] = acc
    return out


def attach_estimates(batch: RolloutBatch, critic, gamma: float, lam: float) -> None:
    """Fill batch.returns and batch.advantages in place.

    critic maps a (B, state_dim) array to (B, 1) values. The critic is
    evaluated once per trajectory including the bootstrap state; terminal
    tails use a zero bootstrap.
    """
    all_returns = []
    all_advs = []
    for traj in batch.trajectories:
        stacked = np.vstack([traj.states, traj.final_state[None, :]])
        values = critic(stacked)[:, 0]
        if traj.terminal:
            values[-1] = 0.0
        all_returns.append(mc_returns(traj.rewards, gamma, bootstrap=values[-1]))
        all_advs.append(gae(traj.rewards, values, gamma, lam))
    batch.returns = np.concatenate(all_returns)
    batch.advantages = np.concatenate(all_advs)
