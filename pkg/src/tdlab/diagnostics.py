"""Experiment-facing diagnostics: holdout KL, metrics CSV schema, sweeps.

The metrics CSV is the frozen interface downstream plots read. Wallclock
lives in a separate timing CSV so the metrics files are bit-identical
across reruns of the same config and seed.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .gaussian import kl_diag

SCHEMA_VERSION = "1"

_BASE_COLUMNS = ("run_id", "seed", "iteration", "env_steps", "mean_return", "mean_action_cost")
_TAIL_COLUMNS = ("max_holdout_kl", "mean_grad_norm", "max_grad_norm", "epochs", "nan_flag")


# ---------------------------------------------------------------------------
# holdout measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HoldoutSet:
    """States reserved for measuring policy movement; never trained on."""

    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[0] == 0:
            raise ValueError("holdout states must be a non-empty (n, state_dim) array")


def _array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class PolicySnapshot:
    """Pre-update (mean, std) on the holdout states, tamper-checked."""

    mean: np.ndarray
    std: np.ndarray
    digest: str

    def verify(self) -> None:
        if _array_digest(self.mean, self.std) != self.digest:
            raise AssertionError("policy snapshot was mutated after capture")


def snapshot_policy(policy, states) -> PolicySnapshot:
    mean, std, _, _ = policy.distribution(states)
    mean = mean.copy()
    std = std.copy()
    return PolicySnapshot(mean=mean, std=std, digest=_array_digest(mean, std))


def max_holdout_kl(holdout: HoldoutSet, snapshot: PolicySnapshot, policy) -> float:
    """Max over holdout states of KL(pre-update dist || current dist)."""
    snapshot.verify()
    new_mean, new_std, _, _ = policy.distribution(holdout.states)
    kls = kl_diag(snapshot.mean, snapshot.std, new_mean, new_std)
    return float(np.max(kls))


# ---------------------------------------------------------------------------
# metrics rows and CSV
# ---------------------------------------------------------------------------

@dataclass
class MetricsRow:
    run_id: str
    seed: int
    iteration: int
    env_steps: int
    mean_return: float
    mean_action_cost: float  # toy env only; nan elsewhere
    sigma_global: tuple
    max_holdout_kl: float
    mean_grad_norm: float
    max_grad_norm: float
    epochs: int
    nan_flag: bool


def metrics_header(action_dim: int) -> list:
    sigma_cols = [f"sigma_global_{i}" for i in range(action_dim)]
    return list(_BASE_COLUMNS) + sigma_cols + list(_TAIL_COLUMNS)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def row_to_record(row: MetricsRow) -> list:
    return (
        [row.run_id, str(row.seed), str(row.iteration), str(row.env_steps),
         _fmt(row.mean_return), _fmt(row.mean_action_cost)]
        + [_fmt(s) for s in row.sigma_global]
        + [_fmt(row.max_holdout_kl), _fmt(row.mean_grad_norm),
           _fmt(row.max_grad_norm), str(row.epochs), str(int(row.nan_flag))]
    )


def write_metrics_csv(path, rows, action_dim: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(metrics_header(action_dim))
        for row in rows:
            writer.writerow(row_to_record(row))


def read_metrics_csv(path) -> dict:
    """Read a metrics CSV back into column arrays (strings for run_id)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        records = list(reader)
    out = {}
    for j, name in enumerate(header):
        col = [rec[j] for rec in records]
        if name == "run_id":
            out[name] = col
        elif name in ("seed", "iteration", "env_steps", "epochs", "nan_flag"):
            out[name] = np.array([int(v) for v in col], dtype=np.int64)
        else:
            out[name] = np.array([float(v) for v in col], dtype=np.float64)
    return out


def write_timing_csv(path, entries) -> None:
    """entries: iterable of (run_id, seed, iteration, wallclock_ms)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "seed", "iteration", "wallclock_ms"])
        for run_id, seed, iteration, ms in entries:
            writer.writerow([run_id, str(seed), str(iteration), _fmt(ms)])


_AGG_METRICS = ("mean_return", "mean_action_cost", "max_holdout_kl")
_QUANTS = (0.1, 0.5, 0.9)


def aggregate_header() -> list:
    cols = ["iteration", "env_steps", "n_seeds"]
    for metric in _AGG_METRICS:
        for q in _QUANTS:
            cols.append(f"{metric}_q{int(q * 100)}")
    return cols


def aggregate_rows(rows_by_seed) -> list:
    """Per-iteration 10/50/90% quantiles across seeds.

    Seeds whose runs ended early (non-finite abort) contribute nothing past
    their last row; quantiles are over the seeds present at each iteration.
    """
    if not rows_by_seed:
        return []
    n_iters = max(len(rows) for rows in rows_by_seed)
    out = []
    for it in range(n_iters):
        present = [rows[it] for rows in rows_by_seed if len(rows) > it]
        record = [str(it), str(present[0].env_steps), str(len(present))]
        for metric in _AGG_METRICS:
            values = np.array([getattr(r, metric) for r in present], dtype=np.float64)
            finite = values[np.isfinite(values)]
            for q in _QUANTS:
                record.append(_fmt(np.quantile(finite, q)) if finite.size else "nan")
        out.append(record)
    return out


def write_aggregate_csv(path, rows_by_seed) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(aggregate_header())
        for record in aggregate_rows(rows_by_seed):
            writer.writerow(record)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepCell:
    params: dict
    run_dir: str
    final: dict = field(default_factory=dict)
    any_nan: bool = False


def sweep(grid: dict, base, out_root, jobs: int = 1) -> list:
    """Run the Cartesian product of `grid` over a base config.

    grid maps config keys (file-format names) to value lists. Each cell gets
    its own run directory under out_root plus a row in sweep_summary.csv
    holding the final-iteration median metrics.
    """
    from .config import CONFIG_KEYS, ConfigError, apply_overrides
    from .trainer import run_experiment

    for key in grid:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"sweep parameter {key!r} is not a config key")

    # an empty grid degenerates to a single run of the base config
    keys = sorted(grid)
    cells = []
    os.makedirs(out_root, exist_ok=True)
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        params = dict(zip(keys, combo))
        overrides = [f"{k}={v}" for k, v in params.items()]
        label = "_".join(f"{k}-{v}" for k, v in params.items()) or "base"
        cfg = apply_overrides(base, overrides + [f"run_id=cell{i:03d}_{label}"])
        result = run_experiment(cfg, out_root, jobs=jobs)
        cell = SweepCell(params=params, run_dir=result["run_dir"])
        last = [reports[-1] for reports in result["reports"] if reports]
        cell.any_nan = any(r.nan_flag for reports in result["reports"] for r in reports)
        for metric in _AGG_METRICS:
            values = np.array([getattr(r, metric) for r in last], dtype=np.float64)
            finite = values[np.isfinite(values)]
            cell.final[metric] = float(np.median(finite)) if finite.size else float("nan")
        cells.append(cell)

    summary_path = os.path.join(out_root, "sweep_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys + ["run_dir", "any_nan"] + [f"final_{m}_median" for m in _AGG_METRICS])
        for cell in cells:
            writer.writerow(
                [str(cell.params[k]) for k in keys]
                + [cell.run_dir, str(int(cell.any_nan))]
                + [_fmt(cell.final[m]) for m in _AGG_METRICS]
            )
    return cells
