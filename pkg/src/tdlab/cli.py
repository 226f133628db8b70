"""Command-line front end.

Verbs: train one config, sweep a grid, run the numeric verification suites,
or run one of the canned studies. Exit codes: 0 success, 1 config error,
2 diverged run under --strict, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, RunConfig, apply_overrides, load_config, validate


class _Parser(argparse.ArgumentParser):
    # usage mistakes are config errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_run_flags(p, config_flag=True):
    if config_flag:
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                       dest="overrides", help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, metavar="N",
                   help="run only this seed (replaces the seed list)")
    p.add_argument("--out", metavar="DIR", default="runs", help="output root")
    p.add_argument("--jobs", type=int, metavar="K", default=1,
                   help="seeds to run in parallel")
    p.add_argument("--strict", action="store_true",
                   help="exit 2 if any run diverged (nan_flag)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tdlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    t = sub.add_parser("train", help="run one configuration over its seed list")
    _add_run_flags(t)

    s = sub.add_parser("sweep", help="run a hyperparameter grid over a base config")
    _add_run_flags(s)
    s.add_argument("--grid", metavar="KEY=VALUE", action="append", default=[],
                   help="one grid point; repeat a key to extend its value list")

    v = sub.add_parser("verify", help="run numeric verification suites")
    v.add_argument("suites", nargs="*", metavar="SUITE",
                   help="suites to run (default: all)")

    for verb, help_text in (
        ("repro-fig1", "toy-env instability study: two target-regression "
                       "variants vs clipped-surrogate baselines"),
        ("repro-kl", "point-mass holdout-KL constraint study"),
        ("repro-epochs", "point-mass sample-reuse study (epochs 15 vs 60)"),
    ):
        r = sub.add_parser(verb, help=help_text)
        _add_run_flags(r, config_flag=False)
    return p


def _load_base_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seeds={args.seed}"])
    validate(cfg)
    return cfg


def _parse_grid(pairs) -> dict:
    from .config import CONFIG_KEYS, _PARSERS

    grid: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"grid entry {pair!r} is not of the form key=value")
        key, _, raw = pair.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"grid key {key!r} is not a config key")
        try:
            value = _PARSERS[key](raw.strip())
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"grid entry {pair!r}: {exc}") from None
        grid.setdefault(key, []).append(value)
    return grid


def _any_nan(rows_by_seed) -> bool:
    return any(row.nan_flag for rows in rows_by_seed for row in rows)


def _finish(diverged: bool, strict: bool) -> int:
    if diverged:
        print("warning: at least one run diverged (nan_flag set)", file=sys.stderr)
        if strict:
            return 2
    return 0


def _cmd_train(args) -> int:
    from .trainer import run_experiment

    cfg = _load_base_config(args)
    result = run_experiment(cfg, args.out, jobs=args.jobs)
    print(f"run directory: {result['run_dir']}")
    for path in result["csv_paths"]:
        print(f"  {path}")
    return _finish(_any_nan(result["rows_by_seed"]), args.strict)


def _cmd_sweep(args) -> int:
    from .diagnostics import sweep

    cfg = _load_base_config(args)
    grid = _parse_grid(args.grid)
    cells = sweep(grid, cfg, args.out, jobs=args.jobs)
    print(f"{len(cells)} cells under {args.out}")
    for cell in cells:
        tag = " DIVERGED" if cell.any_nan else ""
        print(f"  {cell.params} -> {cell.run_dir}{tag}")
    return _finish(any(c.any_nan for c in cells), args.strict)


def _cmd_verify(args) -> int:
    from .verify import run_suites

    try:
        results = run_suites(args.suites or None)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failed = 0
    for r in results:
        print(r.line())
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 3 if failed else 0


def _cmd_repro(args, study: str) -> int:
    from . import repro

    runner = {
        "fig1": repro.run_fig1,
        "kl": repro.run_kl_study,
        "epochs": repro.run_epochs_study,
    }[study]
    seeds = None if args.seed is None else (args.seed,)
    result = runner(args.out, jobs=args.jobs, seeds=seeds)
    for line in result.summary_lines():
        print(line)
    return _finish(result.any_nan, args.strict)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "train":
            return _cmd_train(args)
        if args.verb == "sweep":
            return _cmd_sweep(args)
        if args.verb == "verify":
            return _cmd_verify(args)
        return _cmd_repro(args, args.verb.split("-", 1)[1])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
