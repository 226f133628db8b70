"""Function approximators and their training plumbing.

Small tanh MLPs over float64 numpy arrays, an in-place Adam/SGD optimizer,
and the Gaussian policy container that composes a state-independent
standard deviation with an optional state-dependent head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

__all__ = [
    "Mlp",
    "init_mlp",
    "Optimizer",
    "GaussianPolicy",
    "make_policy",
    "mse_and_delta",
    "l2_norm",
    "save_state",
    "load_state",
]


@dataclass
class Mlp:
    """A feed-forward net: tanh hidden layers, linear output."""

    weights: list
    biases: list

    def forward(self, x):
        """Returns (out, cache); cache feeds backward()."""
        return backend.forward(np.ascontiguousarray(x, dtype=np.float64), self.weights, self.biases)

    def backward(self, delta, cache):
        return backend.backward(np.ascontiguousarray(delta, dtype=np.float64), self.weights, cache)

    def params(self):
        """Flat list of parameter arrays, weights then biases per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(rng: np.random.Generator, sizes, final_scale: float = 1.0) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    final_scale shrinks the output layer; policy mean nets start near zero
    so the initial policy is dominated by the exploration noise.
    """
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        bound = 1.0 / np.sqrt(sizes[i])
        w = rng.uniform(-bound, bound, size=(sizes[i], sizes[i + 1]))
        if i == len(sizes) - 2:
            w *= final_scale
        weights.append(np.ascontiguousarray(w))
        biases.append(np.zeros(sizes[i + 1]))
    return Mlp(weights, biases)


def grads_like(params):
    return [np.zeros_like(p) for p in params]


class Optimizer:
    """In-place Adam or SGD over a fixed list of parameter arrays."""

    def __init__(self, params, kind: str = "adam", lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        self.params = list(params)
        self.kind = kind
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        if kind == "adam":
            self.m = [np.zeros_like(p) for p in self.params]
            self.v = [np.zeros_like(p) for p in self.params]
            self.t = 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match registered parameters")
        if self.kind == "sgd":
            for p, g in zip(self.params, grads):
                p -= self.lr * g
            return
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        if self.kind == "sgd":
            return {}
        out = {"t": np.array([self.t], dtype=np.int64)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m{i}"] = m
            out[f"v{i}"] = v
        return out


@dataclass
class GaussianPolicy:
    """Gaussian policy: MLP mean, composed standard deviation.

    The std combines a state-independent vector with an optional
    state-dependent head on the log scale:
        log std(s) = (global_logstd + varphi * head(s)) / (1 + varphi)
    varphi = 0 (or no head) gives a purely state-independent std.
    """

    mean_net: Mlp
    global_logstd: np.ndarray
    std_net: Mlp | None = None
    varphi: float = 0.0
    min_std: float = 1e-8

    @property
    def action_dim(self) -> int:
        return self.global_logstd.shape[0]

    def distribution(self, states):
        """Batched (mean, std) plus the forward caches needed for training."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        mu, mu_cache = self.mean_net.forward(states)
        if self.std_net is not None and self.varphi > 0.0:
            u, u_cache = self.std_net.forward(states)
            logstd = (self.global_logstd + self.varphi * u) / (1.0 + self.varphi)
        else:
            u_cache = None
            logstd = np.broadcast_to(self.global_logstd, mu.shape)
        std = np.maximum(np.exp(logstd), self.min_std)
        return mu, std, mu_cache, u_cache

    def act(self, state, rng: np.random.Generator):
        """Sample one action; returns (action, noise, mean, std) as 1-d arrays."""
        mu, std, _, _ = self.distribution(state)
        y = rng.standard_normal(self.action_dim)
        return mu[0] + y * std[0], y, mu[0], std[0]

    def set_global_std(self, std):
        std = np.maximum(np.asarray(std, dtype=np.float64), self.min_std)
        self.global_logstd[:] = np.log(std)

    def global_std(self) -> np.ndarray:
        return np.exp(self.global_logstd)


def make_policy(rng: np.random.Generator, state_dim: int, action_dim: int,
                hidden, sigma0: float, varphi: float = 0.0,
                state_dependent_std: bool = False, min_std: float = 1e-8,
                final_scale: float = 0.01) -> GaussianPolicy:
    mean_net = init_mlp(rng, [state_dim, *hidden, action_dim], final_scale=final_scale)
    std_net = None
    if state_dependent_std and varphi > 0.0:
        std_net = init_mlp(rng, [state_dim, *hidden, action_dim], final_scale=final_scale)
        # head outputs log std; bias it so the composed std starts at sigma0
        std_net.biases[-1][:] = np.log(sigma0)
    return GaussianPolicy(
        mean_net=mean_net,
        global_logstd=np.full(action_dim, np.log(sigma0)),
        std_net=std_net,
        varphi=varphi if state_dependent_std else 0.0,
        min_std=min_std,
    )


def mse_and_delta(pred, target):
    """Loss = mean over batch of squared error summed over dims.

    Returns (loss, d loss / d pred).
    """
    diff = pred - target
    loss = float(np.mean(np.sum(diff * diff, axis=-1)))
    return loss, (2.0 / pred.shape[0]) * diff


def l2_norm(arrays) -> float:
    total = 0.0
    for a in arrays:
        total += float(np.sum(a * a))
    return float(np.sqrt(total))


def save_state(path, named_arrays: dict):
    np.savez(path, **named_arrays)


def load_state(path) -> dict:
    with np.load(path) as data:
        return {k: data[k].copy() for k in data.files}


def mlp_state(mlp: Mlp, prefix: str) -> dict:
    out = {}
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        out[f"{prefix}.w{i}"] = w
        out[f"{prefix}.b{i}"] = b
    return out


def mlp_restore(mlp: Mlp, prefix: str, state: dict):
    for i in range(len(mlp.weights)):
        mlp.weights[i][:] = state[f"{prefix}.w{i}"]
        mlp.biases[i][:] = state[f"{prefix}.b{i}"]
