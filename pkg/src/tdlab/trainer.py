"""Training loops: target-regression algorithms, a clipped-surrogate PPO
baseline, and a no-freeze ablation, sharing one rollout/advantage pipeline.

The defining structural difference between the families:

* tdl_* builds a frozen TargetBatch once per iteration, regresses the
  policy heads onto it for E epochs by plain MSE, and only afterwards
  overwrites the state-independent std (ordering is asserted).
* ppo_clip performs E epochs of clipped-surrogate ascent with a trainable
  state-independent log-std; optional entropy bonus, std floor, and clip
  size are the stability remedies under study.
* cacla recomputes mean targets from the drifting policy every minibatch
  (no freezing); its std pipeline is identical to tdl_es.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .advantage import attach_estimates
from .config import RunConfig, to_text
from .envs import QuadraticCostEnv, collect_rollout, make_env, toy_mean_action_cost
from .gaussian import log_prob_diag
from .nets import GaussianPolicy, Mlp, Optimizer, init_mlp, l2_norm, make_policy, mse_and_delta
from .targets import build_targets

_LOG_RATIO_CAP = 30.0  # keeps a diverging surrogate finite (exp(30) ~ 1e13);
# binds only when the update is already pathological, so curves stay plottable
# instead of turning into NaNs at the first blowup.

SCHEMA_VERSION_LINE = diagnostics.SCHEMA_VERSION + "\n"


@dataclass
class IterationReport:
    iteration: int
    mean_return: float
    mean_action_cost: float
    sigma_global: np.ndarray
    max_holdout_kl: float
    mean_grad_norm: float
    max_grad_norm: float
    epochs: int
    nan_flag: bool
    wallclock_ms: float
    extras: dict = field(default_factory=dict)


@dataclass
class TrainingState:
    env: object
    policy: GaussianPolicy
    critic: Mlp
    policy_opt: Optimizer
    critic_opt: Optimizer
    rng: np.random.Generator
    iteration: int = 0
    env_steps: int = 0


def build_state(cfg: RunConfig, seed: int) -> TrainingState:
    rng = np.random.default_rng(seed)
    env = make_env(cfg.env)
    policy = make_policy(
        rng,
        env.state_dim,
        env.action_dim,
        cfg.hidden,
        cfg.sigma0,
        varphi=cfg.varphi,
        state_dependent_std=cfg.varphi > 0.0,
        min_std=max(cfg.min_std, 1e-8),
        final_scale=cfg.final_scale,
    )
    critic = init_mlp(rng, [env.state_dim, *cfg.hidden, 1], final_scale=1.0)
    params = policy.mean_net.params()
    if policy.std_net is not None:
        params = params + policy.std_net.params()
    if cfg.algorithm == "ppo_clip":
        params = params + [policy.global_logstd]
    policy_opt = Optimizer(params, kind=cfg.optimizer, lr=cfg.lr)
    critic_opt = Optimizer(critic.params(), kind=cfg.optimizer, lr=cfg.lr)
    return TrainingState(
        env=env, policy=policy, critic=critic,
        policy_opt=policy_opt, critic_opt=critic_opt, rng=rng,
    )


def _interleave(gws, gbs):
    return [g for pair in zip(gws, gbs) for g in pair]


def _params_finite(state: TrainingState) -> bool:
    for p in state.policy_opt.params + state.critic_opt.params:
        if not np.all(np.isfinite(p)):
            return False
    return True


def _critic_fn(critic: Mlp):
    return lambda x: critic.forward(x)[0]


def _critic_step(state, states_mb, returns_mb):
    v, cache = state.critic.forward(states_mb)
    loss, delta = mse_and_delta(v, returns_mb[:, None])
    gws, gbs = state.critic.backward(delta, cache)
    state.critic_opt.step(_interleave(gws, gbs))
    return loss


def _gather_phase(state: TrainingState, cfg: RunConfig):
    """Rollout, advantage estimation, holdout refresh, pre-update snapshot."""
    batch = collect_rollout(state.env, state.policy, cfg.steps_per_iteration, state.rng)
    attach_estimates(batch, _critic_fn(state.critic), cfg.gamma, cfg.lam)
    holdout_batch = collect_rollout(state.env, state.policy, cfg.holdout_size, state.rng)
    holdout = diagnostics.HoldoutSet(states=holdout_batch.states)
    snapshot = diagnostics.snapshot_policy(state.policy, holdout.states)
    state.env_steps += cfg.steps_per_iteration
    return batch, holdout, snapshot


def _finish_report(state, cfg, batch, holdout, snapshot, grad_norms,
                   epochs_done, nan_flag, t0) -> IterationReport:
    policy = state.policy
    kl = diagnostics.max_holdout_kl(holdout, snapshot, policy)
    extras = {}
    if policy.std_net is not None:
        new_std = policy.distribution(holdout.states)[1]
        extras["sigma_ratio_max_dev"] = float(np.max(np.abs(new_std / snapshot.std - 1.0)))
    cost = (
        toy_mean_action_cost(policy) if isinstance(state.env, QuadraticCostEnv) else float("nan")
    )
    returns = batch.episode_returns
    report = IterationReport(
        iteration=state.iteration,
        mean_return=float(np.mean(returns)) if len(returns) else float("nan"),
        mean_action_cost=cost,
        sigma_global=policy.global_std().copy(),
        max_holdout_kl=kl,
        mean_grad_norm=float(np.mean(grad_norms)) if grad_norms else 0.0,
        max_grad_norm=float(np.max(grad_norms)) if grad_norms else 0.0,
        epochs=epochs_done,
        nan_flag=nan_flag,
        wallclock_ms=(time.perf_counter() - t0) * 1e3,
        extras=extras,
    )
    state.iteration += 1
    return report


def _std_head_step(policy, states_mb, std_target_mb):
    """One MSE step of the state-dependent std head toward sigma_hat_t.

    The head's raw output u parameterizes exp(u); the regression is on the
    std scale, so d loss / d u = 2 (exp(u) - target) * exp(u) / B.
    """
    u, cache = policy.std_net.forward(states_mb)
    pred = np.exp(u)
    diff = pred - std_target_mb
    loss = float(np.mean(np.sum(diff * diff, axis=-1)))
    delta = (2.0 / u.shape[0]) * diff * pred
    gws, gbs = policy.std_net.backward(delta, cache)
    return loss, _interleave(gws, gbs)


def tdl_iteration(state: TrainingState, cfg: RunConfig) -> IterationReport:
    t0 = time.perf_counter()
    policy = state.policy
    batch, holdout, snapshot = _gather_phase(state, cfg)
    targets = build_targets(batch, cfg.tdl_hyper(), cfg.target_algo())
    frozen_checksum = targets.checksum()
    sigma_before = policy.global_std().copy()

    grad_norms = []
    nan_flag = False
    epochs_done = 0
    total = batch.total_steps
    m = cfg.minibatch_size
    for _epoch in range(cfg.epochs):
        # invariants: targets stay frozen, global std untouched until after
        # the epoch loop
        assert targets.checksum() == frozen_checksum
        assert np.array_equal(policy.global_std(), sigma_before)
        perm = state.rng.permutation(total)
        for start in range(0, total, m):
            idx = perm[start:start + m]
            states_mb = batch.states[idx]
            mu, cache = policy.mean_net.forward(states_mb)
            loss, delta = mse_and_delta(mu, targets.mean[idx])
            gws, gbs = policy.mean_net.backward(delta, cache)
            grads = _interleave(gws, gbs)
            if policy.std_net is not None:
                std_loss, std_grads = _std_head_step(policy, states_mb, targets.std[idx])
                loss += std_loss
                grads = grads + std_grads
            state.policy_opt.step(grads)
            grad_norms.append(l2_norm(grads))
            loss += _critic_step(state, states_mb, batch.returns[idx])
            if not np.isfinite(loss):
                nan_flag = True
                break
        if nan_flag:
            break
        epochs_done += 1

    if not nan_flag and not _params_finite(state):
        nan_flag = True
    if not nan_flag:
        policy.set_global_std(targets.global_std)
    return _finish_report(state, cfg, batch, holdout, snapshot, grad_norms,
                          epochs_done, nan_flag, t0)


def cacla_iteration(state: TrainingState, cfg: RunConfig) -> IterationReport:
    """tdl_es without frozen mean targets: each minibatch regresses the
    current mean toward the sampled action on positive-advantage samples."""
    t0 = time.perf_counter()
    policy = state.policy
    batch, holdout, snapshot = _gather_phase(state, cfg)
    targets = build_targets(batch, cfg.tdl_hyper(), "es")  # std pipeline only
    sigma_before = policy.global_std().copy()
    positive = (batch.advantages > 0.0)[:, None]

    grad_norms = []
    nan_flag = False
    epochs_done = 0
    total = batch.total_steps
    m = cfg.minibatch_size
    for _epoch in range(cfg.epochs):
        assert np.array_equal(policy.global_std(), sigma_before)
        perm = state.rng.permutation(total)
        for start in range(0, total, m):
            idx = perm[start:start + m]
            states_mb = batch.states[idx]
            mu, cache = policy.mean_net.forward(states_mb)
            # recomputed target: drifts with the policy between minibatches
            mean_target = mu + cfg.nu * positive[idx] * (batch.actions[idx] - mu)
            loss, delta = mse_and_delta(mu, mean_target)
            gws, gbs = policy.mean_net.backward(delta, cache)
            grads = _interleave(gws, gbs)
            if policy.std_net is not None:
                std_loss, std_grads = _std_head_step(policy, states_mb, targets.std[idx])
                loss += std_loss
                grads = grads + std_grads
            state.policy_opt.step(grads)
            grad_norms.append(l2_norm(grads))
            loss += _critic_step(state, states_mb, batch.returns[idx])
            if not np.isfinite(loss):
                nan_flag = True
                break
        if nan_flag:
            break
        epochs_done += 1

    if not nan_flag and not _params_finite(state):
        nan_flag = True
    if not nan_flag:
        policy.set_global_std(targets.global_std)
    return _finish_report(state, cfg, batch, holdout, snapshot, grad_norms,
                          epochs_done, nan_flag, t0)


def ppo_surrogate(policy: GaussianPolicy, states, actions, old_logp, adv,
                  clip: float, entropy_coef: float):
    """Clipped-surrogate loss (negated for descent) and policy gradients.

    Returns (loss, grads) with grads ordered as mean-net params followed by
    the state-independent log-std vector. The gradient of
    min(surr1, surr2) flows only through the unclipped branch; that
    branch's per-sample coefficient ratio*adv multiplies d log pi.
    """
    mu, std, cache, _ = policy.distribution(states)
    z = (actions - mu) / std
    logp = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(std), axis=1) \
        - 0.5 * mu.shape[1] * np.log(2.0 * np.pi)
    ratio = np.exp(np.clip(logp - old_logp, -_LOG_RATIO_CAP, _LOG_RATIO_CAP))
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    coef = np.where(surr1 <= surr2, surr1, 0.0)
    b = states.shape[0]
    loss = -float(np.mean(np.minimum(surr1, surr2)))
    delta_mu = -(coef[:, None] * z / std) / b
    gws, gbs = policy.mean_net.backward(delta_mu, cache)
    g_logstd = -np.mean(coef[:, None] * (z * z - 1.0), axis=0)
    if entropy_coef > 0:
        g_logstd = g_logstd - entropy_coef  # dH/dlogstd_i = 1
        loss -= entropy_coef * float(np.sum(np.log(std[0])))
    return loss, _interleave(gws, gbs) + [g_logstd]


def ppo_iteration(state: TrainingState, cfg: RunConfig) -> IterationReport:
    t0 = time.perf_counter()
    policy = state.policy
    batch, holdout, snapshot = _gather_phase(state, cfg)
    adv = batch.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    old_logp = log_prob_diag(batch.old_mean, batch.old_std, batch.actions)
    log_min_std = np.log(cfg.min_std) if cfg.min_std > 0 else None

    grad_norms = []
    nan_flag = False
    epochs_done = 0
    total = batch.total_steps
    m = cfg.minibatch_size
    for _epoch in range(cfg.epochs):
        perm = state.rng.permutation(total)
        for start in range(0, total, m):
            idx = perm[start:start + m]
            states_mb = batch.states[idx]
            loss, grads = ppo_surrogate(
                policy, states_mb, batch.actions[idx], old_logp[idx], adv[idx],
                cfg.ppo_clip, cfg.entropy_coef,
            )
            state.policy_opt.step(grads)
            if log_min_std is not None:
                np.maximum(policy.global_logstd, log_min_std, out=policy.global_logstd)
            grad_norms.append(l2_norm(grads))
            loss += _critic_step(state, states_mb, batch.returns[idx])
            if not np.isfinite(loss):
                nan_flag = True
                break
        if nan_flag:
            break
        epochs_done += 1

    if not nan_flag and not _params_finite(state):
        nan_flag = True
    return _finish_report(state, cfg, batch, holdout, snapshot, grad_norms,
                          epochs_done, nan_flag, t0)


_ITERATIONS = {
    "tdl_direct": tdl_iteration,
    "tdl_es": tdl_iteration,
    "tdl_esr": tdl_iteration,
    "ppo_clip": ppo_iteration,
    "cacla": cacla_iteration,
}


def run_iteration(state: TrainingState, cfg: RunConfig) -> IterationReport:
    # float spill (overflow/invalid) is an expected observable during the
    # instability study; the nan_flag guard is the detector, not warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _ITERATIONS[cfg.algorithm](state, cfg)


def run_seed(cfg: RunConfig, seed: int) -> list:
    """All iterations for one seed; stops early if a run goes non-finite."""
    state = build_state(cfg, seed)
    reports = []
    for _ in range(cfg.iterations):
        report = run_iteration(state, cfg)
        reports.append(report)
        if report.nan_flag:
            break
    return reports


def _rows_for_seed(cfg: RunConfig, seed: int, reports) -> list:
    rows = []
    for rep in reports:
        rows.append(
            diagnostics.MetricsRow(
                run_id=cfg.run_id,
                seed=seed,
                iteration=rep.iteration,
                env_steps=(rep.iteration + 1) * cfg.steps_per_iteration,
                mean_return=rep.mean_return,
                mean_action_cost=rep.mean_action_cost,
                sigma_global=tuple(float(s) for s in rep.sigma_global),
                max_holdout_kl=rep.max_holdout_kl,
                mean_grad_norm=rep.mean_grad_norm,
                max_grad_norm=rep.max_grad_norm,
                epochs=rep.epochs,
                nan_flag=rep.nan_flag,
            )
        )
    return rows


def _seed_task(args):
    cfg, seed = args
    return run_seed(cfg, seed)


def run_experiment(cfg: RunConfig, out_dir, jobs: int = 1) -> dict:
    """Run every seed, persist metrics, return reports and paths.

    Layout under out_dir/run_id: resolved.cfg, schema_version.txt, one
    seed_<n>.csv per seed, aggregate.csv with 10/50/90% quantile bands,
    and timing.csv (wallclock sidecar, excluded from the deterministic
    metrics files).
    """
    run_dir = os.path.join(out_dir, cfg.run_id)
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "resolved.cfg"), "w", encoding="utf-8") as fh:
        fh.write(to_text(cfg))
    with open(os.path.join(run_dir, "schema_version.txt"), "w", encoding="utf-8") as fh:
        fh.write(SCHEMA_VERSION_LINE)

    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_reports = list(pool.map(_seed_task, [(cfg, s) for s in cfg.seeds]))
    else:
        all_reports = [run_seed(cfg, seed) for seed in cfg.seeds]

    action_dim = make_env(cfg.env).action_dim
    rows_by_seed = []
    timing = []
    csv_paths = []
    for seed, reports in zip(cfg.seeds, all_reports):
        rows = _rows_for_seed(cfg, seed, reports)
        rows_by_seed.append(rows)
        path = os.path.join(run_dir, f"seed_{seed}.csv")
        diagnostics.write_metrics_csv(path, rows, action_dim)
        csv_paths.append(path)
        for rep in reports:
            timing.append((cfg.run_id, seed, rep.iteration, rep.wallclock_ms))
    diagnostics.write_aggregate_csv(os.path.join(run_dir, "aggregate.csv"), rows_by_seed)
    diagnostics.write_timing_csv(os.path.join(run_dir, "timing.csv"), timing)
    return {
        "run_dir": run_dir,
        "reports": all_reports,
        "rows_by_seed": rows_by_seed,
        "csv_paths": csv_paths,
    }
