"""Run configuration: a typed record plus a flat key = value file format.

One line per setting, `#` starts a comment, unknown keys are hard errors.
Integer lists accept comma separation (`seeds = 0,1,2`) and ranges
(`seeds = 0..99`, inclusive). The `lambda` key maps to the `lam` field
because `lambda` is reserved in Python.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .targets import TdlHyper

ALGORITHMS = ("tdl_direct", "tdl_es", "tdl_esr", "ppo_clip", "cacla")
ENV_NAMES = ("quadratic", "pointmass")

_TARGET_ALGO = {"tdl_direct": "direct", "tdl_es": "es", "tdl_esr": "esr"}


class ConfigError(Exception):
    """Invalid configuration: unknown key, bad value, broken invariant."""


@dataclass
class RunConfig:
    env: str = "pointmass"
    algorithm: str = "tdl_es"
    seeds: tuple = (0,)
    steps_per_iteration: int = 2048
    minibatch_size: int = 256
    epochs: int = 60
    gamma: float = 0.995
    lam: float = 0.97
    lr: float = 1e-4
    sigma0: float = 0.3
    alpha: float = 0.025
    nu: float = 1.0
    revise_ratio: float = 0.1
    window: int = 2
    varphi: float = 0.0
    ppo_clip: float = 0.2
    entropy_coef: float = 0.0
    min_std: float = 0.0
    iterations: int = 100
    holdout_size: int = 256
    hidden: tuple = (64, 64, 64)
    optimizer: str = "adam"
    final_scale: float = 0.01
    run_id: str = "run"

    def tdl_hyper(self) -> TdlHyper:
        return TdlHyper(
            alpha=self.alpha,
            nu=self.nu,
            revise_ratio=self.revise_ratio,
            window=self.window,
            varphi=self.varphi,
        )

    def target_algo(self) -> str:
        """The target-construction rule name, for tdl/cacla algorithms."""
        if self.algorithm == "cacla":
            return "es"
        return _TARGET_ALGO[self.algorithm]


def _parse_int_tuple(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(",") if part.strip() != "")


_PARSERS = {
    "env": str,
    "algorithm": str,
    "seeds": _parse_int_tuple,
    "steps_per_iteration": int,
    "minibatch_size": int,
    "epochs": int,
    "gamma": float,
    "lambda": float,
    "lr": float,
    "sigma0": float,
    "alpha": float,
    "nu": float,
    "revise_ratio": float,
    "window": int,
    "varphi": float,
    "ppo_clip": float,
    "entropy_coef": float,
    "min_std": float,
    "iterations": int,
    "holdout_size": int,
    "hidden": _parse_int_tuple,
    "optimizer": str,
    "final_scale": float,
    "run_id": str,
}

_KEY_TO_FIELD = {key: ("lam" if key == "lambda" else key) for key in _PARSERS}
_FIELD_TO_KEY = {field: key for key, field in _KEY_TO_FIELD.items()}

CONFIG_KEYS = tuple(sorted(_PARSERS))


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            parsed = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        setattr(cfg, _KEY_TO_FIELD[key], parsed)
    validate(cfg)
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config(text, base=base)


def apply_overrides(cfg: RunConfig, pairs) -> RunConfig:
    """Apply `key=value` strings (CLI --set) on top of a config."""
    out = dataclasses.replace(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            setattr(out, _KEY_TO_FIELD[key], _PARSERS[key](value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    validate(out)
    return out


def validate(cfg: RunConfig) -> None:
    def fail(msg):
        raise ConfigError(msg)

    if cfg.env not in ENV_NAMES:
        fail(f"env must be one of {ENV_NAMES}, got {cfg.env!r}")
    if cfg.algorithm not in ALGORITHMS:
        fail(f"algorithm must be one of {ALGORITHMS}, got {cfg.algorithm!r}")
    if not cfg.seeds:
        fail("seeds must be non-empty")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        fail("seeds must be distinct")
    if cfg.steps_per_iteration < 1:
        fail("steps_per_iteration must be >= 1")
    if not (1 <= cfg.minibatch_size <= cfg.steps_per_iteration):
        fail("minibatch_size must satisfy 1 <= minibatch_size <= steps_per_iteration")
    if cfg.epochs < 1:
        fail("epochs must be >= 1")
    if not (0.0 < cfg.gamma <= 1.0):
        fail("gamma must be in (0, 1]")
    if not (0.0 <= cfg.lam <= 1.0):
        fail("lambda must be in [0, 1]")
    if cfg.lr <= 0:
        fail("lr must be > 0")
    if cfg.sigma0 <= 0:
        fail("sigma0 must be > 0")
    if cfg.ppo_clip <= 0:
        fail("ppo_clip must be > 0")
    if cfg.entropy_coef < 0:
        fail("entropy_coef must be >= 0")
    if cfg.min_std < 0:
        fail("min_std must be >= 0")
    if cfg.iterations < 1:
        fail("iterations must be >= 1")
    if cfg.holdout_size < 1:
        fail("holdout_size must be >= 1")
    if not cfg.hidden or any(h < 1 for h in cfg.hidden):
        fail("hidden must be a non-empty list of positive layer widths")
    if cfg.optimizer not in ("adam", "sgd"):
        fail(f"optimizer must be adam or sgd, got {cfg.optimizer!r}")
    if cfg.final_scale < 0:
        fail("final_scale must be >= 0")
    if not cfg.run_id or any(c in cfg.run_id for c in "/\\"):
        fail("run_id must be a non-empty path-safe name")
    try:
        cfg.tdl_hyper()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def to_text(cfg: RunConfig) -> str:
    """Serialize a config back to the flat file format (resolved dump)."""
    lines = []
    for field in dataclasses.fields(cfg):
        value = getattr(cfg, field.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{_FIELD_TO_KEY[field.name]} = {value}")
    return "\n".join(lines) + "\n"
