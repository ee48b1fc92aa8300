"""Desk-scale four-mode benchmark: combined-flow SMC against both
birth-death baselines.

Uses the shipped configs (the benchmark settings: N=500, T=1000,
gamma=0.05, h=gamma).  NOTE: at these settings the Langevin proposal is
unstable on the stiff modes (covariance entries of 0.01 need gamma < 0.02),
so the birth-death runs abort and the SMC run plateaus; pass --stable to
rerun with gamma=0.015 / T=3000 (matched total flow time, low-noise
resampling), which reproduces the reference quality bands.

Run:  python3 demos/four_mode_benchmark.py [--stable] [--replicates R]
"""

import argparse
from dataclasses import replace
from pathlib import Path

from wfr_smc.harness import parse_config_file, run_experiment

CONFIGS = ("table1_smc_wfr", "table1_bdl_pde", "table1_bdl_kl")
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--stable", action="store_true",
                        help="gamma=0.015, T=3000, systematic resampling")
    parser.add_argument("--replicates", type=int, default=3)
    parser.add_argument("--out", default="results/four_mode")
    args = parser.parse_args()

    for name in CONFIGS:
        config = parse_config_file(CONFIG_DIR / f"{name}.ini")
        config = replace(config, replicates=args.replicates, out_dir=None)
        if args.stable:
            config = replace(config, gamma=0.015, n_iterations=3000,
                             kde_bandwidth=0.015, resampling="systematic",
                             metric_cadence=25)
        summary = run_experiment(config, out_dir=Path(args.out) / name)
        mmd, mmd_se = summary.aggregates["mmd"]
        mse, mse_se = summary.aggregates["mse_mean"]
        crossings = summary.threshold_iterations()
        print(f"{name:18s} failed {summary.n_failed}/{config.replicates}  "
              f"mmd^2 {mmd:.4f}+-{mmd_se:.4f}  mse_mean {mse:.4f}+-{mse_se:.4f}  "
              f"median crossing {sorted(crossings)[len(crossings) // 2] if len(crossings) else 'n/a'}")
    print(f"CSVs written under {args.out}/")


if __name__ == "__main__":
    main()
