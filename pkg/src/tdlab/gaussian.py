"""Diagonal-Gaussian action distributions.

Sampling, log-density, closed-form KL divergence, and the relative
(mu, sigma) parameterization in which the KL between an old and a new
distribution depends only on the per-dimension offsets measured in units
of the old standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiagGaussian",
    "RelativeOffset",
    "sample",
    "log_prob",
    "kl_divergence",
    "kl_diag",
    "log_prob_diag",
    "relative_offset",
    "apply_offset",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DiagGaussian:
    """A d-dimensional Gaussian with diagonal covariance, stored as (mean, std).

    Standard deviations are stored directly, not as log-std: the distribution
    math stays positive-by-construction and network heads exponentiate at the
    boundary instead.
    """

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vector(self.mean, "mean"))
        object.__setattr__(self, "std", _as_vector(self.std, "std"))
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same length")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("mean components must be finite")
        if not (np.all(np.isfinite(self.std)) and np.all(self.std > 0.0)):
            raise ValueError("std components must be finite and strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class RelativeOffset:
    """New-distribution parameters relative to an old one.

    mu_rel is the mean offset in units of the old std; sigma_rel is the
    per-dimension std ratio new/old.
    """

    mu_rel: np.ndarray
    sigma_rel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_rel", _as_vector(self.mu_rel, "mu_rel"))
        object.__setattr__(self, "sigma_rel", _as_vector(self.sigma_rel, "sigma_rel"))
        if self.mu_rel.shape != self.sigma_rel.shape:
            raise ValueError("mu_rel and sigma_rel must have the same length")
        if not (np.all(np.isfinite(self.sigma_rel)) and np.all(self.sigma_rel > 0.0)):
            raise ValueError("sigma_rel components must be finite and positive")


def sample(dist: DiagGaussian, rng: np.random.Generator):
    """Draw one action and return it together with the unit noise that made it.

    action = mean + y * std with y ~ N(0, I). The noise is returned so target
    rules can reuse the exact draw.
    """
    y = rng.standard_normal(dist.dim)
    return dist.mean + y * dist.std, y


def log_prob(dist: DiagGaussian, action) -> float:
    """Sum over dimensions of log N(a_i | mean_i, std_i^2)."""
    a = np.asarray(action, dtype=np.float64)
    z = (a - dist.mean) / dist.std
    return float(-0.5 * np.sum(z * z) - np.sum(np.log(dist.std)) - 0.5 * dist.dim * _LOG_2PI)


def log_prob_diag(mean, std, actions) -> np.ndarray:
    """Vectorized log-density: leading axes broadcast, last axis is the action dim."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    a = np.asarray(actions, dtype=np.float64)
    z = (a - mean) / std
    d = a.shape[-1]
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(std), axis=-1) - 0.5 * d * _LOG_2PI


def relative_offset(old: DiagGaussian, new: DiagGaussian) -> RelativeOffset:
    """Express `new` relative to `old`: mean offset in old-std units, std ratio."""
    if old.dim != new.dim:
        raise ValueError(f"dimension mismatch: old d={old.dim}, new d={new.dim}")
    return RelativeOffset(
        mu_rel=(new.mean - old.mean) / old.std,
        sigma_rel=new.std / old.std,
    )


def apply_offset(old: DiagGaussian, rel: RelativeOffset) -> DiagGaussian:
    """Inverse of relative_offset: reconstruct the new distribution from old."""
    return DiagGaussian(
        mean=old.mean + rel.mu_rel * old.std,
        std=rel.sigma_rel * old.std,
    )


def kl_divergence(old: DiagGaussian, new: DiagGaussian) -> float:
    """KL(old || new) in closed form.

    With (mu_t, sigma_t) the relative offset of `new` w.r.t. `old`, this is
    (1/2) sum_i [ 2 ln sigma_ti + (1 + mu_ti^2) / sigma_ti^2 - 1 ].
    """
    if old.dim != new.dim:
        raise ValueError(f"dimension mismatch: old d={old.dim}, new d={new.dim}")
    rel = relative_offset(old, new)
    s2 = rel.sigma_rel * rel.sigma_rel
    val = 0.5 * np.sum(2.0 * np.log(rel.sigma_rel) + (1.0 + rel.mu_rel**2) / s2 - 1.0)
    # exact round-off can leave a tiny negative value at old == new
    return float(max(val, 0.0))


def kl_diag(mean_old, std_old, mean_new, std_new) -> np.ndarray:
    """Vectorized KL(old || new); leading axes broadcast, last axis is summed."""
    mean_old = np.asarray(mean_old, dtype=np.float64)
    std_old = np.asarray(std_old, dtype=np.float64)
    mean_new = np.asarray(mean_new, dtype=np.float64)
    std_new = np.asarray(std_new, dtype=np.float64)
    if mean_old.shape[-1] != mean_new.shape[-1]:
        raise ValueError("dimension mismatch between old and new means")
    mu = (mean_new - mean_old) / std_old
    sr = std_new / std_old
    out = 0.5 * np.sum(2.0 * np.log(sr) + (1.0 + mu * mu) / (sr * sr) - 1.0, axis=-1)
    return np.maximum(out, 0.0)
