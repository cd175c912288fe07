"""Command line entry point ``lab``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .errors import ConfigError, LabError
from .harness import KINDS, ExperimentConfig, load_config, run_experiment, write_artifacts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Lattice mean value experiments.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="JSON experiment config (optional for selftest)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--strict", action="store_true", help="exit 1 when the verdict is fail")
    p.add_argument("--out", help="output directory for run artifacts")
    p.add_argument("--emit", choices=("csv", "json"), help="also print the report to stdout")
    return p


def _config(args) -> ExperimentConfig:
    if args.config is None:
        if args.kind != "selftest":
            raise ConfigError(f"{args.kind} needs --config")
        cfg = ExperimentConfig(kind="selftest")
    else:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"config is for {cfg.kind!r}, command is {args.kind!r}")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    run_dir = write_artifacts(report, args.out)
    if args.emit == "json":
        json.dump(report.to_dict(), sys.stdout, indent=2, default=str)
        print()
    elif args.emit == "csv":
        w = csv.writer(sys.stdout)
        w.writerow(["kind", "n", "seed", "lhs_mean", "lhs_stderr", "rhs_value", "rhs_tail", "z_score", "verdict"])
        w.writerow([cfg.kind, cfg.n, cfg.seed, report.lhs.mean, report.lhs.stderr, report.rhs.value, report.rhs.tail_bound, report.z_score, report.verdict])
    print(
        f"{cfg.kind}: lhs {report.lhs.mean:.6g} ± {report.lhs.stderr:.2g}, rhs {report.rhs.value:.6g} (tail {report.rhs.tail_bound:.2g}),"
        f" z {report.z_score:.2f}, {report.verdict} [{run_dir}]",
        file=sys.stderr,
    )
    if args.strict and report.verdict == "fail":
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
