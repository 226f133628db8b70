"""Canned studies behind the repro-* CLI verbs.

Three fixed experiment recipes: the toy-environment instability comparison,
the point-mass holdout-KL constraint study, and the point-mass sample-reuse
study. All constants live here so the studies are reproducible commands, not
config files to get wrong; the CLI only chooses output directory, job count,
and optionally a reduced seed list for smoke runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, validate
from .trainer import run_experiment

__all__ = ["StudyResult", "run_fig1", "run_kl_study", "run_epochs_study",
           "FIG1_VARIANTS", "COST_FLOOR"]

# Guards ratio statistics against exact-zero costs on the toy task.
COST_FLOOR = 1e-6

# Toy task, one 10-neuron hidden layer, plain SGD, shared learning rate: the
# regression variants and the surrogate baselines differ only in their update
# rule. entropy_coef 0.1 is the smallest grid value that kept the entropy
# remedy stable here (0.01 and 0.03 still oscillate at this scale).
_FIG1_BASE = dict(
    env="quadratic", seeds=tuple(range(100)), steps_per_iteration=128,
    minibatch_size=32, epochs=8, gamma=0.995, lam=0.97, lr=0.01, sigma0=0.3,
    iterations=300, holdout_size=32, hidden=(10,), optimizer="sgd",
    final_scale=1.0,
)

FIG1_VARIANTS = (
    ("tdl_direct", dict(algorithm="tdl_direct", alpha=0.025)),
    ("tdl_es", dict(algorithm="tdl_es", alpha=0.025)),
    ("ppo", dict(algorithm="ppo_clip", ppo_clip=0.2)),
    ("ppo_entropy", dict(algorithm="ppo_clip", ppo_clip=0.2, entropy_coef=0.1)),
    ("ppo_minstd", dict(algorithm="ppo_clip", ppo_clip=0.2, min_std=0.05)),
    ("ppo_smallclip", dict(algorithm="ppo_clip", ppo_clip=0.05)),
)

# Point-mass profile: deeper nets, Adam, conservative learning rate.
_PM_BASE = dict(
    env="pointmass", seeds=tuple(range(5)), steps_per_iteration=512,
    minibatch_size=64, gamma=0.995, lam=0.97, sigma0=0.3,
    holdout_size=128, hidden=(64, 64, 64), optimizer="adam", final_scale=0.01,
)

# Constraint study: conservative learning rate so the network tracks its
# bounded targets tightly, plus an exploration floor. Without the floor this
# task anneals the std toward zero indefinitely and any fixed mean-tracking
# residual eventually dominates the holdout KL, which says nothing about the
# update rule under test.
_KL_STUDY = dict(iterations=100, lr=1e-4, epochs=60, min_std=0.05)

# The std descends from sigma0 to the floor over roughly the first 35
# iterations; per-iteration KL during that descent is dominated by the global
# std ratio, not the mean targets, so the constraint claim applies to the
# stationary regime after it.
_KL_WARMUP = 40

# Sample-reuse study: the aggressive learning rate is the regime where the
# update rules separate. The regression variants converge harder onto their
# frozen bounded targets as epochs rise, while the surrogate keeps pushing
# past its clip and destabilizes.
_EPOCHS_STUDY = dict(iterations=60, lr=1e-3)


@dataclass
class StudyResult:
    name: str
    run_dirs: dict
    stats: dict = field(default_factory=dict)
    medians: dict = field(default_factory=dict)
    any_nan: bool = False

    def summary_lines(self):
        lines = [f"study {self.name}:"]
        for variant, run_dir in self.run_dirs.items():
            lines.append(f"  {variant}: {run_dir}")
        for key, value in self.stats.items():
            lines.append(f"  {key} = {value}")
        return lines


def _metric_matrix(rows_by_seed, metric: str, iterations: int) -> np.ndarray:
    """(n_seeds, iterations) array, NaN-padded where a seed aborted early."""
    out = np.full((len(rows_by_seed), iterations), np.nan)
    for i, rows in enumerate(rows_by_seed):
        for row in rows:
            out[i, row.iteration] = getattr(row, metric)
    return out


def _run_variants(base, variants, out_dir, jobs, seeds, run_prefix):
    results = {}
    for name, overrides in variants:
        params = {**base, **overrides}
        if seeds is not None:
            params["seeds"] = tuple(seeds)
        cfg = RunConfig(run_id=f"{run_prefix}_{name}", **params)
        validate(cfg)
        results[name] = run_experiment(cfg, out_dir, jobs=jobs)
    return results


def run_fig1(out_dir, jobs: int = 1, seeds=None) -> StudyResult:
    """Toy-task comparison: regression variants vs surrogate baselines."""
    t0 = time.perf_counter()
    raw = _run_variants(_FIG1_BASE, FIG1_VARIANTS, out_dir, jobs, seeds, "fig1")
    iterations = _FIG1_BASE["iterations"]

    result = StudyResult("fig1", {k: v["run_dir"] for k, v in raw.items()})
    medians = {}
    for name, res in raw.items():
        costs = _metric_matrix(res["rows_by_seed"], "mean_action_cost", iterations)
        grads = _metric_matrix(res["rows_by_seed"], "mean_grad_norm", iterations)
        med = np.nanmedian(costs, axis=0)
        medians[name] = med
        floored = np.maximum(med, COST_FLOOR)
        running_min = np.minimum.accumulate(floored)
        result.stats[f"{name}_final_median_cost"] = float(np.nanmedian(med[-30:]))
        result.stats[f"{name}_max_ratio_to_running_min"] = float(
            np.nanmax(floored / running_min)
        )
        result.stats[f"{name}_tail_mean_grad_norm"] = float(np.nanmedian(grads[:, -30:]))
        result.any_nan = result.any_nan or any(
            row.nan_flag for rows in res["rows_by_seed"] for row in rows
        )
    result.stats["wallclock_s"] = round(time.perf_counter() - t0, 1)
    result.medians.update(medians)
    return result


def run_kl_study(out_dir, jobs: int = 1, seeds=None) -> StudyResult:
    """Per-iteration holdout KL: trust-region targets vs default clip."""
    t0 = time.perf_counter()
    variants = (
        ("tdl_direct", dict(algorithm="tdl_direct", alpha=0.025, varphi=1.0)),
        ("ppo", dict(algorithm="ppo_clip", ppo_clip=0.2)),
    )
    base = {**_PM_BASE, **_KL_STUDY}
    raw = _run_variants(base, variants, out_dir, jobs, seeds, "kl")
    iterations = base["iterations"]
    warmup = min(_KL_WARMUP, iterations - 1)

    result = StudyResult("kl", {k: v["run_dir"] for k, v in raw.items()})
    threshold = 1.2 * 2 * 0.025  # 1.2 * action_dim * alpha on the 2-d task
    result.stats["threshold"] = threshold
    result.stats["warmup_iterations"] = warmup
    for name, res in raw.items():
        kls = _metric_matrix(res["rows_by_seed"], "max_holdout_kl", iterations)
        post = kls[:, warmup:]
        finite = post[np.isfinite(post)]
        result.stats[f"{name}_frac_over"] = float(np.mean(finite > threshold))
        over_counts = np.sum(post > threshold, axis=1)
        result.stats[f"{name}_median_seed_over_count"] = float(
            np.median(over_counts)
        )
        result.stats[f"{name}_seeds_with_over"] = int(np.sum(over_counts > 0))
        result.stats[f"{name}_n_seeds"] = post.shape[0]
        result.any_nan = result.any_nan or any(
            row.nan_flag for rows in res["rows_by_seed"] for row in rows
        )
    result.stats["wallclock_s"] = round(time.perf_counter() - t0, 1)
    return result


def run_epochs_study(out_dir, jobs: int = 1, seeds=None) -> StudyResult:
    """Sample reuse at fixed total environment steps: epochs 15 vs 60."""
    t0 = time.perf_counter()
    variants = []
    for algo, extra in (("tdl_es", dict(alpha=0.025, varphi=1.0)),
                        ("ppo_clip", dict(ppo_clip=0.2))):
        for epochs in (15, 60):
            variants.append((f"{algo}_e{epochs}",
                             dict(algorithm=algo, epochs=epochs, **extra)))
    base = {**_PM_BASE, **_EPOCHS_STUDY}
    raw = _run_variants(base, variants, out_dir, jobs, seeds, "epochs")
    iterations = base["iterations"]

    result = StudyResult("epochs", {k: v["run_dir"] for k, v in raw.items()})
    finals = {}
    for name, res in raw.items():
        rets = _metric_matrix(res["rows_by_seed"], "mean_return", iterations)
        finals[name] = float(np.nanmedian(rets[:, -1]))
        result.stats[f"{name}_final_median_return"] = finals[name]
        result.any_nan = result.any_nan or any(
            row.nan_flag for rows in res["rows_by_seed"] for row in rows
        )
    for algo in ("tdl_es", "ppo_clip"):
        result.stats[f"{algo}_degradation"] = (
            finals[f"{algo}_e15"] - finals[f"{algo}_e60"]
        )
    result.stats["wallclock_s"] = round(time.perf_counter() - t0, 1)
    return result
