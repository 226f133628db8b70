"""Config file format and validation tests."""

import dataclasses

import pytest

from tdlab.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    load_config,
    parse_config,
    to_text,
)

FULL = """
# instability study, toy task
env = quadratic
algorithm = ppo_clip
seeds = 3,5,8
steps_per_iteration = 128
minibatch_size = 32
epochs = 8
gamma = 0.99
lambda = 0.95
lr = 0.05
sigma0 = 0.3
alpha = 0.025
nu = 0.5
revise_ratio = 0.2
window = 3
varphi = 0.0
ppo_clip = 0.2
entropy_coef = 0.01
min_std = 0.05
iterations = 300
holdout_size = 64
hidden = 10
optimizer = sgd
final_scale = 1.0
run_id = ppo_entropy
"""


def test_parse_full_file():
    cfg = parse_config(FULL)
    assert cfg.env == "quadratic"
    assert cfg.algorithm == "ppo_clip"
    assert cfg.seeds == (3, 5, 8)
    assert cfg.steps_per_iteration == 128
    assert cfg.minibatch_size == 32
    assert cfg.epochs == 8
    assert cfg.gamma == 0.99
    assert cfg.lam == 0.95  # `lambda` key maps to lam
    assert cfg.lr == 0.05
    assert cfg.nu == 0.5
    assert cfg.window == 3
    assert cfg.entropy_coef == 0.01
    assert cfg.min_std == 0.05
    assert cfg.hidden == (10,)
    assert cfg.optimizer == "sgd"
    assert cfg.final_scale == 1.0
    assert cfg.run_id == "ppo_entropy"


def test_seed_range_syntax():
    cfg = parse_config("seeds = 0..99\n")
    assert cfg.seeds == tuple(range(100))


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("learning_rate = 0.1\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("lr = 0.1\nepochs = sixty\n")


def test_missing_equals_rejected():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config("just some text\n")


def test_comments_and_blanks_ignored():
    cfg = parse_config("\n# comment only\nlr = 0.5  # trailing\n\n")
    assert cfg.lr == 0.5


def test_minibatch_larger_than_batch_rejected():
    with pytest.raises(ConfigError, match="minibatch_size"):
        parse_config("steps_per_iteration = 32\nminibatch_size = 64\n")


def test_invalid_algorithm_rejected():
    with pytest.raises(ConfigError, match="algorithm"):
        parse_config("algorithm = trpo\n")


def test_invalid_env_rejected():
    with pytest.raises(ConfigError, match="env"):
        parse_config("env = humanoid\n")


def test_duplicate_seeds_rejected():
    with pytest.raises(ConfigError, match="distinct"):
        parse_config("seeds = 1,1\n")


def test_tdl_param_validation_flows_through():
    with pytest.raises(ConfigError):
        parse_config("alpha = -0.5\n")


def test_round_trip_through_text():
    cfg = parse_config(FULL)
    again = parse_config(to_text(cfg))
    assert dataclasses.asdict(again) == dataclasses.asdict(cfg)


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/path.cfg")


def test_load_config_from_disk(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("env = quadratic\nhidden = 10\n")
    cfg = load_config(path)
    assert cfg.env == "quadratic"
    assert cfg.hidden == (10,)


def test_apply_overrides():
    cfg = RunConfig()
    out = apply_overrides(cfg, ["lr=0.01", "seeds=4,5"])
    assert out.lr == 0.01 and out.seeds == (4, 5)
    assert cfg.lr == 1e-4  # original untouched
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["bogus=1"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["no-equals-here"])


def test_target_algo_mapping():
    assert RunConfig(algorithm="tdl_direct").target_algo() == "direct"
    assert RunConfig(algorithm="tdl_esr").target_algo() == "esr"
    assert RunConfig(algorithm="cacla").target_algo() == "es"
