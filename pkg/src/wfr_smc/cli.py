"""Command line entry point: ``run``, ``compare`` and ``oracle`` subcommands.

Exit codes: 0 success, 1 every replicate of a run failed, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .gaussian_flows import GaussianState, evolve, gaussian_kl
from .harness import (ConfigError, compare_flows, parse_config_file,
                      parse_schedule, run_experiment)
from .targets import GaussianTarget, make_target


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfr-smc",
        description="Benchmark runner for gradient-flow particle samplers")
    parser.add_argument("--version", action="version",
                        version=f"wfr-smc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--replicates", type=int, default=None)
    run_p.add_argument("--out", type=Path, default=None)
    run_p.add_argument("--paper-scale", action="store_true",
                       help="use 50 replicates as in the reproduced tables")

    cmp_p = sub.add_parser("compare", help="run several configs and tabulate "
                                           "iterations-to-threshold")
    cmp_p.add_argument("configs", type=Path, nargs="+")
    cmp_p.add_argument("--seed", type=int, default=None)
    cmp_p.add_argument("--replicates", type=int, default=None)
    cmp_p.add_argument("--out", type=Path, default=None)
    cmp_p.add_argument("--paper-scale", action="store_true")

    orc_p = sub.add_parser("oracle", help="dump exact Gaussian moment curves")
    orc_p.add_argument("--flow", required=True)
    orc_p.add_argument("--mu0", required=True,
                       help='initial Gaussian preset, e.g. "gauss1d(0,1)"')
    orc_p.add_argument("--pi", required=True,
                       help='target Gaussian preset, e.g. "gauss1d(20,0.1)"')
    orc_p.add_argument("--grid", default="0:5:101",
                       help="time grid start:stop:num (inclusive linspace)")
    orc_p.add_argument("--schedule", default=None,
                       help='tempering schedule, e.g. "linear_horizon(5)"')
    orc_p.add_argument("--out", type=Path, default=None,
                       help="output CSV path (default: stdout)")
    return parser


def _apply_overrides(config, args):
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.replicates is not None:
        config = replace(config, replicates=args.replicates)
    return config


def _cmd_run(args) -> int:
    config = _apply_overrides(parse_config_file(args.config), args)
    summary = run_experiment(config, out_dir=args.out,
                             paper_scale=args.paper_scale)
    for result in summary.replicates:
        cross = result.iterations_to_threshold
        print(f"replicate {result.replicate}: {result.status}"
              + (f", crossed threshold at iteration {cross}" if cross else ""))
    for name, (mean, stderr) in summary.aggregates.items():
        print(f"{name}: mean {mean:.6g} (stderr {stderr:.3g})")
    return 1 if summary.n_failed == len(summary.replicates) else 0


def _cmd_compare(args) -> int:
    configs = [_apply_overrides(parse_config_file(p), args)
               for p in args.configs]
    report = compare_flows(configs, out_dir=args.out,
                           paper_scale=args.paper_scale)
    width = max(len(r["label"]) for r in report.rows)
    print(f"{'label'.ljust(width)}  mean-iters  stderr  crossed/ok")
    for row in report.rows:
        print(f"{row['label'].ljust(width)}  {row['mean']:10.1f}  "
              f"{row['stderr']:6.1f}  {row['n_crossed']}/{row['n_ok']}")
    return 0


def _parse_grid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be start:stop:num")
    start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    return np.linspace(start, stop, num)


def _gaussian_preset(spec: str) -> GaussianState:
    target = make_target(spec)
    if not isinstance(target, GaussianTarget):
        raise ValueError(f"oracle endpoints must be Gaussian presets, got {spec!r}")
    return GaussianState(target.mean, target.cov)


def _cmd_oracle(args) -> int:
    mu0 = _gaussian_preset(args.mu0)
    pi = _gaussian_preset(args.pi)
    grid = _parse_grid(args.grid)
    schedule = None
    if args.schedule is not None:
        schedule = parse_schedule(args.schedule, float(grid[-1]))
    states = evolve(args.flow, mu0, pi, grid, schedule=schedule)
    d = mu0.dim
    if d == 1:
        header = "t,m,C,kl"
    else:
        header = "t," + ",".join(f"m{i}" for i in range(d)) + "," + ",".join(
            f"c{i}{j}" for i in range(d) for j in range(d)) + ",kl"
    lines = [f"# wfr-smc v{__version__}", header]
    for state in states:
        kl = gaussian_kl(state, pi)
        entries = [format(state.time, ".17g")]
        entries += [format(v, ".17g") for v in state.mean]
        entries += [format(v, ".17g") for v in state.cov.ravel()]
        entries.append(format(kl, ".17g"))
        lines.append(",".join(entries))
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8", newline="\n")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_oracle(args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
