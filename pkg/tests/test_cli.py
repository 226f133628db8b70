"""Command-line wiring: verbs, flag parsing, exit codes, artifacts."""

import os

import pytest

from tdlab import cli, repro
from tdlab.config import ConfigError
from tdlab.repro import StudyResult


_FAST = [
    "--set", "env=quadratic",
    "--set", "algorithm=tdl_direct",
    "--set", "iterations=2",
    "--set", "steps_per_iteration=16",
    "--set", "minibatch_size=8",
    "--set", "epochs=1",
    "--set", "holdout_size=4",
    "--set", "hidden=10",
]


def _train(tmp_path, *extra):
    return cli.main(["train", *_FAST, "--seed", "0",
                     "--out", str(tmp_path), *extra])


def test_train_success_writes_artifacts(tmp_path, capsys):
    assert _train(tmp_path) == 0
    out = capsys.readouterr().out
    assert "run directory:" in out
    (run_dir,) = [e.path for e in os.scandir(tmp_path) if e.is_dir()]
    names = sorted(os.listdir(run_dir))
    assert "seed_0.csv" in names
    assert "aggregate.csv" in names
    assert "timing.csv" in names
    assert "resolved.cfg" in names


def test_train_seed_flag_replaces_seed_list(tmp_path):
    assert cli.main(["train", *_FAST, "--seed", "3", "--out", str(tmp_path)]) == 0
    (run_dir,) = [e.path for e in os.scandir(tmp_path) if e.is_dir()]
    names = os.listdir(run_dir)
    assert "seed_3.csv" in names
    assert "seed_0.csv" not in names


def test_unknown_verb_exits_one():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1


def test_missing_verb_exits_one():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0


def test_unknown_override_key_exits_one(tmp_path, capsys):
    code = _train(tmp_path, "--set", "bogus=1")
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_malformed_override_exits_one(tmp_path):
    assert _train(tmp_path, "--set", "alpha") == 1


def test_missing_config_file_exits_one(tmp_path):
    code = cli.main(["train", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path)])
    assert code == 1


def test_invalid_config_value_exits_one(tmp_path):
    assert _train(tmp_path, "--set", "alpha=-0.5") == 1


def test_diverged_run_exit_codes(tmp_path, capsys):
    # a huge surrogate step drives the ratio terms to NaN within a few
    # iterations (the regression variants saturate instead of overflowing)
    blowup = ["--set", "algorithm=ppo_clip", "--set", "optimizer=sgd",
              "--set", "lr=1e9", "--set", "iterations=4"]
    assert _train(tmp_path / "lenient", *blowup) == 0
    assert "diverged" in capsys.readouterr().err
    assert _train(tmp_path / "strict", *blowup, "--strict") == 2


def test_verify_single_suite_passes(capsys):
    assert cli.main(["verify", "gradients"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 5
    assert "FAIL" not in out
    assert "checks passed" in out


def test_verify_unknown_suite_exits_one(capsys):
    assert cli.main(["verify", "no-such-suite"]) == 1
    assert "error" in capsys.readouterr().err


def test_sweep_grid_over_base(tmp_path, capsys):
    code = cli.main(["sweep", *_FAST, "--seed", "0", "--out", str(tmp_path),
                     "--grid", "alpha=0.01", "--grid", "alpha=0.05"])
    assert code == 0
    assert "2 cells" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "sweep_summary.csv")


def test_parse_grid_accumulates_per_key():
    grid = cli._parse_grid(["alpha=0.01", "alpha=0.05", "nu=0.3"])
    assert grid == {"alpha": [0.01, 0.05], "nu": [0.3]}


@pytest.mark.parametrize("entry", ["alpha", "bogus=1", "alpha=notanumber"])
def test_parse_grid_rejects_bad_entries(entry):
    with pytest.raises(ConfigError):
        cli._parse_grid([entry])


def test_repro_verbs_dispatch(monkeypatch, tmp_path, capsys):
    calls = {}

    def fake_study(out_dir, jobs=1, seeds=None):
        calls["args"] = (out_dir, jobs, seeds)
        return StudyResult("fig1", {"tdl_direct": str(tmp_path / "d")},
                           stats={"answer": 42})

    monkeypatch.setattr(repro, "run_fig1", fake_study)
    code = cli.main(["repro-fig1", "--out", str(tmp_path), "--jobs", "2",
                     "--seed", "7"])
    assert code == 0
    assert calls["args"] == (str(tmp_path), 2, (7,))
    out = capsys.readouterr().out
    assert "study fig1" in out
    assert "answer = 42" in out


def test_repro_strict_diverged_exits_two(monkeypatch, tmp_path):
    def fake_study(out_dir, jobs=1, seeds=None):
        return StudyResult("kl", {}, any_nan=True)

    monkeypatch.setattr(repro, "run_kl_study", fake_study)
    assert cli.main(["repro-kl", "--out", str(tmp_path), "--strict"]) == 2
