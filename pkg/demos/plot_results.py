"""Plot metric CSVs produced by the harness (or the CLI `run` command).

Reads every replicate_*.csv beneath one or more result directories and
plots the chosen metric column against iteration, one panel per directory.

Run:  python3 demos/plot_results.py results/four_mode/* --metric mmd
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

COLUMNS = ("iteration", "wallclock_s", "ess_fraction", "mmd",
           "w1_marginal_avg", "mse_mean", "mse_cov")


def load(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("iteration"):
            continue
        rows.append([float(v) for v in line.split(",")])
    return np.array(rows)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("dirs", nargs="+")
    parser.add_argument("--metric", default="mmd", choices=COLUMNS[2:])
    parser.add_argument("--out", default="results/metrics.png")
    parser.add_argument("--logy", action="store_true")
    args = parser.parse_args()

    col = COLUMNS.index(args.metric)
    fig, axes = plt.subplots(1, len(args.dirs),
                             figsize=(4.5 * len(args.dirs), 3.4),
                             sharey=True, squeeze=False)
    for ax, directory in zip(axes[0], args.dirs):
        for csv in sorted(Path(directory).glob("replicate_*.csv")):
            data = load(csv)
            ax.plot(data[:, 0], data[:, col], alpha=0.6, lw=1)
        ax.set_title(Path(directory).name)
        ax.set_xlabel("iteration")
        if args.logy:
            ax.set_yscale("log")
    axes[0][0].set_ylabel(args.metric)
    fig.tight_layout()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
