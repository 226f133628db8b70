"""Target-distribution construction.

Each collected sample proposes a target Gaussian (mu_hat_t, sigma_hat_t)
for the policy to regress toward. Variance targets keep the old variance
on non-positive advantage and adopt the sample's squared offset otherwise;
mean targets come in a trust-region-clipped form (direct), a step-toward-
the-action form (es), and a neighbor-revised variant of the latter (esr).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .gaussian import DiagGaussian

__all__ = [
    "GLOBAL_STD_FLOOR",
    "TdlHyper",
    "TargetBatch",
    "gate_value",
    "gate_values",
    "target_variance",
    "state_independent_target",
    "compose_std",
    "target_mean_direct",
    "target_mean_es",
    "revise_noise",
    "build_targets",
]

GLOBAL_STD_FLOOR = 1e-6

_GATES = ("sign", "indicator")
_ALGOS = ("direct", "es", "esr")


@dataclass(frozen=True)
class TdlHyper:
    """Target-rule hyperparameters.

    alpha: trust-region size of the direct rule (offset norm clipped at
    sqrt(2*alpha)); nu: step size of the es rule; revise_ratio/window: the
    esr blend weight r and half-width N; varphi: state-dependent std weight.
    """

    alpha: float = 0.025
    nu: float = 1.0
    revise_ratio: float = 0.1
    window: int = 2
    varphi: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not (0.0 < self.nu <= 1.0):
            raise ValueError("nu must be in (0, 1]")
        if not (0.0 <= self.revise_ratio <= 1.0):
            raise ValueError("revise_ratio must be in [0, 1]")
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if self.varphi < 0:
            raise ValueError("varphi must be >= 0")


@dataclass(frozen=True)
class TargetBatch:
    """Frozen regression targets for one iteration."""

    mean: np.ndarray        # (T, d) per-sample target means
    std: np.ndarray         # (T, d) per-sample target stds (>= 0, zeros allowed)
    global_std: np.ndarray  # (d,) pooled state-independent target, floored

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.mean, self.std, self.global_std):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def gate_value(adv: float, gate: str) -> float:
    """Advantage gate: sign(adv), or the indicator of adv > 0. sign(0) = 0."""
    if gate == "sign":
        return float(np.sign(adv))
    if gate == "indicator":
        return 1.0 if adv > 0 else 0.0
    raise ValueError(f"unknown gate {gate!r}; choose from {_GATES}")


def gate_values(advantages, gate: str) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=np.float64)
    if gate == "sign":
        return np.sign(advantages)
    if gate == "indicator":
        return (advantages > 0).astype(np.float64)
    raise ValueError(f"unknown gate {gate!r}; choose from {_GATES}")


def target_variance(a_t, old: DiagGaussian, adv: float) -> np.ndarray:
    """Per-sample std target: |a - mu_old| on positive advantage, else sigma_old.

    In expectation over actions this preserves the old variance when the
    advantage labels carry no information about the action.
    """
    a = np.asarray(a_t, dtype=np.float64)
    if adv > 0:
        return np.abs(a - old.mean)
    return old.std.copy()


def state_independent_target(sigma_hats) -> np.ndarray:
    """Elementwise root-mean-square of per-sample std targets (unfloored)."""
    sigma_hats = list(sigma_hats)
    if len(sigma_hats) == 0:
        raise ValueError("need at least one per-sample target")
    stacked = np.asarray(sigma_hats, dtype=np.float64)
    return np.sqrt(np.mean(stacked * stacked, axis=0))


def compose_std(sigma_global, sigma_state, varphi: float) -> np.ndarray:
    """Weighted geometric mean: global^(1/(varphi+1)) * state^(varphi/(varphi+1))."""
    g = np.asarray(sigma_global, dtype=np.float64)
    s = np.asarray(sigma_state, dtype=np.float64)
    if np.any(g <= 0) or np.any(s <= 0):
        raise ValueError("compose_std requires strictly positive inputs")
    if varphi < 0:
        raise ValueError("varphi must be >= 0")
    w = varphi / (varphi + 1.0)
    return np.exp((1.0 - w) * np.log(g) + w * np.log(s))


def _direct_scale(noise: np.ndarray, alpha: float) -> float:
    # clip the relative offset norm at sqrt(2*alpha); zero noise needs no clip
    norm = float(np.linalg.norm(noise))
    if norm == 0.0:
        return 1.0
    return min(1.0, np.sqrt(2.0 * alpha) / norm)


def target_mean_direct(old: DiagGaussian, y_t, adv: float, alpha: float,
                       gate: str = "sign") -> np.ndarray:
    """Trust-region-clipped mean target.

    mu_hat = mu_old + g(adv) * min(1, sqrt(2*alpha)/||y||) * y * sigma_old.
    The relative offset norm never exceeds sqrt(2*alpha), which caps the
    per-sample KL at alpha plus std-ratio terms.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    y = np.asarray(y_t, dtype=np.float64)
    return old.mean + gate_value(adv, gate) * _direct_scale(y, alpha) * y * old.std


def target_mean_es(old: DiagGaussian, a_t, adv: float, nu: float,
                   gate: str = "indicator") -> np.ndarray:
    """Step-toward-the-action mean target: mu_hat = mu_old + g(adv)*nu*(a - mu_old)."""
    if not (0.0 < nu <= 1.0):
        raise ValueError("nu must be in (0, 1]")
    a = np.asarray(a_t, dtype=np.float64)
    return old.mean + gate_value(adv, gate) * nu * (a - old.mean)


def revise_noise(window, center_index: int, r: float) -> np.ndarray:
    """Blend a sample's noise with the advantage-weighted noise of its window.

    window is a list of (y, adv) pairs including the center sample.
    y_prime = sum_j y_j * max(0, adv_j) / sum_j max(0, adv_j);
    result = (1-r)*y_center + r*y_prime. If no window advantage is positive
    the center noise is returned unchanged (there is no direction to tilt to).
    """
    if not (0.0 <= r <= 1.0):
        raise ValueError("r must be in [0, 1]")
    if not window:
        raise ValueError("window must be nonempty")
    if not (0 <= center_index < len(window)):
        raise ValueError("center_index out of range")
    y_center = np.asarray(window[center_index][0], dtype=np.float64)
    weights = np.array([max(0.0, float(adv)) for _, adv in window])
    total = float(weights.sum())
    if total == 0.0:
        return y_center.copy()
    y_prime = np.zeros_like(y_center)
    for (y, _), w in zip(window, weights):
        y_prime += w * np.asarray(y, dtype=np.float64)
    y_prime /= total
    return (1.0 - r) * y_center + r * y_prime


def _revise_noises_batch(noises, advantages, slices, window: int, r: float) -> np.ndarray:
    """Vectorized revise_noise over every sample; windows never cross episodes."""
    if r == 0.0 or window < 0:
        return noises.copy()
    out = noises.copy()
    pos = np.maximum(advantages, 0.0)
    for sl in slices:
        y = noises[sl]
        w = pos[sl]
        n = y.shape[0]
        # prefix sums give O(1) window sums per sample
        cw = np.concatenate([[0.0], np.cumsum(w)])
        cwy = np.vstack([np.zeros((1, y.shape[1])), np.cumsum(w[:, None] * y, axis=0)])
        idx = np.arange(n)
        lo = np.maximum(idx - window, 0)
        hi = np.minimum(idx + window + 1, n)
        wsum = cw[hi] - cw[lo]
        wysum = cwy[hi] - cwy[lo]
        nonzero = wsum > 0.0
        y_prime = np.where(nonzero[:, None], wysum / np.where(nonzero, wsum, 1.0)[:, None], y)
        out[sl] = (1.0 - r) * y + r * y_prime
    return out


def build_targets(batch, hyper: TdlHyper, algo: str, gate: str | None = None) -> TargetBatch:
    """Construct the full TargetBatch for one iteration.

    Per-sample std targets always use the original actions (the esr revision
    affects mean targets only). Default gate: sign for direct, indicator for
    es/esr. The pooled global std is floored at GLOBAL_STD_FLOOR.
    """
    if algo not in _ALGOS:
        raise ValueError(f"unknown target algorithm {algo!r}; choose from {_ALGOS}")
    if gate is None:
        gate = "sign" if algo == "direct" else "indicator"
    adv = np.asarray(batch.advantages, dtype=np.float64)
    mu_old = batch.old_mean
    std_old = batch.old_std
    g = gate_values(adv, gate)[:, None]

    pos = (adv > 0)[:, None]
    std_target = np.where(pos, np.abs(batch.actions - mu_old), std_old)

    if algo == "direct":
        norms = np.linalg.norm(batch.noises, axis=1)
        scale = np.where(norms == 0.0, 1.0, np.minimum(1.0, np.sqrt(2.0 * hyper.alpha) / np.where(norms == 0.0, 1.0, norms)))
        mean_target = mu_old + g * scale[:, None] * batch.noises * std_old
    elif algo == "es":
        mean_target = mu_old + g * hyper.nu * (batch.actions - mu_old)
    else:  # esr
        revised = _revise_noises_batch(
            batch.noises, adv, batch.slices, hyper.window, hyper.revise_ratio
        )
        # revised action minus old mean reduces to the revised noise times std
        mean_target = mu_old + g * hyper.nu * (revised * std_old)

    global_std = np.maximum(
        state_independent_target(std_target), GLOBAL_STD_FLOOR
    )
    return TargetBatch(mean=mean_target, std=std_target, global_std=global_std)
